"""Surrogate replacement of predicted PII spans and leakage auditing."""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable

from .textcore import Document, PiiSpan, check_no_overlap


def surrogate(category: str, spaced: bool = False) -> str:
    """The replacement text for a category; the spaced variant restores
    the bracketed template rendering."""
    return f"<*** {category} ***>" if spaced else f"<***{category}***>"


@dataclass(frozen=True)
class RedactedDocument:
    doc_id: str
    redacted_text: str
    applied: tuple[PiiSpan, ...]  # original offsets
    # non-overlapping original segments outside the applied spans, each
    # with the offset shift that maps it into redacted_text
    segments: tuple[tuple[int, int, int], ...]

    def map_offset(self, pos: int) -> int | None:
        """Redacted-text offset for an original offset outside every
        applied span; None for positions inside one. The document-end
        offset maps too."""
        i = bisect_right(self.segments, (pos, float("inf"), 0)) - 1
        if i >= 0:
            start, end, delta = self.segments[i]
            last = i == len(self.segments) - 1
            if start <= pos < end or (last and pos == end):
                return pos + delta
        return None


def redact(doc: Document, spans: Iterable[PiiSpan],
           spaced: bool = False) -> RedactedDocument:
    """Replace each span with its category surrogate.

    Replacement runs right to left so earlier offsets stay valid; text
    outside the spans is preserved byte for byte.
    """
    ordered = check_no_overlap(spans)
    for s in ordered:
        if s.end > len(doc.text):
            raise ValueError(f"span {s.triple()} outside document")
    text = doc.text
    for s in reversed(ordered):
        text = text[:s.start] + surrogate(s.category, spaced) + text[s.end:]
    segments = []
    pos = 0
    delta = 0
    for s in ordered:
        segments.append((pos, s.start, delta))
        delta += len(surrogate(s.category, spaced)) - (s.end - s.start)
        pos = s.end
    segments.append((pos, len(doc.text), delta))
    return RedactedDocument(
        doc_id=doc.doc_id,
        redacted_text=text,
        applied=tuple(ordered),
        segments=tuple(segments),
    )


def audit_leakage(
    redacted: RedactedDocument,
    gold_spans: Iterable[PiiSpan],
    doc: Document,
) -> list[PiiSpan]:
    """Gold spans whose full surface survives at its mapped position.

    A gold span untouched by every applied span maps cleanly into the
    redacted text, where its original surface still reads verbatim; such
    spans are the leaks. An empty list means complete redaction with
    respect to the given gold.
    """
    leaks = []
    for g in sorted(gold_spans, key=lambda s: (s.start, s.end)):
        if any(g.start < a.end and g.end > a.start for a in redacted.applied):
            continue
        mapped = redacted.map_offset(g.start)
        if mapped is None:
            continue
        surface = doc.text[g.start:g.end]
        if redacted.redacted_text[mapped:mapped + len(surface)] == surface:
            leaks.append(g)
    return leaks
