"""Documents, tokenization, the PII tag set, and the BIO codec.

Offsets everywhere are Unicode scalar indices into the document text,
half-open [start, end). Lines are the unit of labeling: a span never
crosses a newline. All types are immutable values; every function here
is pure.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

CATEGORIES: tuple[str, ...] = ("PERSON", "ADDRESS", "DOB", "IDN", "PHONE")

# Canonical tag order. "O" first: score ties during decoding resolve to the
# earliest tag, so an untrained model predicts all-O.
BIO_TAGS: tuple[str, ...] = ("O",) + tuple(
    f"{p}-{c}" for c in CATEGORIES for p in ("B", "I")
)
TAG_INDEX: dict[str, int] = {t: i for i, t in enumerate(BIO_TAGS)}

SOURCES = ("human", "machine")


class OverlapError(ValueError):
    """Two spans of one annotator overlap."""


class CrossLineError(ValueError):
    """A span crosses a newline boundary."""


class ShapeError(ValueError):
    """Tag sequence shape does not match the document's tokens."""


@dataclass(frozen=True)
class Token:
    start: int
    end: int
    surface: str

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"empty token at {self.start}")


@dataclass(frozen=True, order=True)
class PiiSpan:
    """A PII mention: half-open character range plus category and provenance."""

    start: int
    end: int
    category: str
    source: str = "human"
    annotator_id: str = ""

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"empty span ({self.start}, {self.end})")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")

    def triple(self) -> tuple[int, int, str]:
        return (self.start, self.end, self.category)


@dataclass(frozen=True)
class BioSequence:
    """Tokens of one text line with their BIO tags."""

    tokens: tuple[Token, ...]
    tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ShapeError(
                f"{len(self.tags)} tags for {len(self.tokens)} tokens"
            )
        for t in self.tags:
            if t not in TAG_INDEX:
                raise ValueError(f"unknown tag {t!r}")

    def __len__(self) -> int:
        return len(self.tokens)


_TOKEN_RE = re.compile(r"[^\W_]+|\S", re.UNICODE)


def tokenize_line(line: str, offset: int = 0) -> tuple[Token, ...]:
    """Tokens of one line: maximal alphanumeric runs or single symbols."""
    return tuple(
        Token(m.start() + offset, m.end() + offset, m.group())
        for m in _TOKEN_RE.finditer(line)
    )


def tokenize(text: str) -> list[tuple[Token, ...]]:
    """Per-line token sequences with document-global offsets.

    Empty text yields no lines. Whitespace never appears inside a token;
    re-slicing the text by any token's offsets reproduces its surface.
    """
    if text == "":
        return []
    out = []
    pos = 0
    for line in text.split("\n"):
        out.append(tokenize_line(line, pos))
        pos += len(line) + 1
    return out


@dataclass(frozen=True)
class Document:
    """Raw text plus deterministic line/token segmentation."""

    doc_id: str
    text: str
    lines: tuple[tuple[int, int], ...] = field(repr=False)
    tokens: tuple[tuple[Token, ...], ...] = field(repr=False)

    @classmethod
    def make(cls, doc_id: str, text: str) -> "Document":
        lines = []
        pos = 0
        if text != "":
            for line in text.split("\n"):
                lines.append((pos, pos + len(line)))
                pos += len(line) + 1
        return cls(
            doc_id=doc_id,
            text=text,
            lines=tuple(lines),
            tokens=tuple(tokenize(text)),
        )

    def line_text(self, index: int) -> str:
        s, e = self.lines[index]
        return self.text[s:e]

    def line_of(self, pos: int) -> int:
        """Index of the line containing character position `pos`."""
        for i, (s, e) in enumerate(self.lines):
            if s <= pos <= e:
                return i
        raise ValueError(f"position {pos} outside document {self.doc_id}")


def check_no_overlap(spans) -> list[PiiSpan]:
    """Sorted spans, raising OverlapError on any overlapping pair."""
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise OverlapError(f"spans {a.triple()} and {b.triple()} overlap")
    return ordered


def repair_bio(tags) -> tuple[str, ...]:
    """Fix illegal I-X tags: an I-X not continuing a same-category entity
    becomes B-X. Valid input passes through unchanged; idempotent."""
    out = []
    prev = "O"
    for t in tags:
        if t.startswith("I-"):
            cat = t[2:]
            if prev == f"B-{cat}" or prev == f"I-{cat}":
                out.append(t)
            else:
                out.append(f"B-{cat}")
        else:
            out.append(t)
        prev = out[-1]
    return tuple(out)


def spans_to_line_tags(
    tokens: tuple[Token, ...], spans: list[PiiSpan]
) -> tuple[str, ...]:
    """BIO tags for one line's tokens given spans sorted and line-contained.

    A span not aligned to token boundaries expands to the covering tokens.
    Raises OverlapError if two spans expand onto the same token.
    """
    tags = ["O"] * len(tokens)
    owner = [-1] * len(tokens)
    for si, span in enumerate(spans):
        first = True
        hit = False
        for i, tok in enumerate(tokens):
            if tok.start < span.end and tok.end > span.start:
                if owner[i] != -1:
                    raise OverlapError(
                        f"spans expand onto the same token at {tok.start}"
                    )
                owner[i] = si
                tags[i] = f"B-{span.category}" if first else f"I-{span.category}"
                first = False
                hit = True
        if not hit:
            raise ValueError(f"span {span.triple()} covers no token")
    return tuple(tags)


def spans_to_bio(doc: Document, spans) -> list[BioSequence]:
    """Encode spans as per-line BIO sequences.

    First token overlapping a span gets B-category, subsequent covered
    tokens I-category, all others O.
    """
    ordered = check_no_overlap(spans)
    per_line: dict[int, list[PiiSpan]] = {}
    for span in ordered:
        li = doc.line_of(span.start)
        ls, le = doc.lines[li]
        if span.end > le:
            raise CrossLineError(f"span {span.triple()} crosses a line break")
        per_line.setdefault(li, []).append(span)
    return [
        BioSequence(toks, spans_to_line_tags(toks, per_line.get(i, [])))
        for i, toks in enumerate(doc.tokens)
    ]


def line_tags_to_spans(
    tokens: tuple[Token, ...],
    tags,
    source: str = "human",
    annotator_id: str = "",
) -> list[PiiSpan]:
    """Decode one line's (repaired) tags to spans: each maximal B-X (I-X)*
    run becomes a span from its first token start to its last token end."""
    spans = []
    start = end = -1
    cat = ""
    for tok, tag in zip(tokens, repair_bio(tags)):
        if tag.startswith("B-"):
            if cat:
                spans.append(PiiSpan(start, end, cat, source, annotator_id))
            cat = tag[2:]
            start, end = tok.start, tok.end
        elif tag.startswith("I-"):
            end = tok.end
        else:
            if cat:
                spans.append(PiiSpan(start, end, cat, source, annotator_id))
            cat = ""
    if cat:
        spans.append(PiiSpan(start, end, cat, source, annotator_id))
    return spans


def bio_to_spans(
    doc: Document, sequences, source: str = "human", annotator_id: str = ""
) -> set[PiiSpan]:
    """Decode per-line tag sequences back to spans (inverse of spans_to_bio).

    Accepts BioSequence objects or bare tag sequences aligned to doc.tokens.
    Invalid BIO is repaired first.
    """
    if len(sequences) != len(doc.tokens):
        raise ShapeError(
            f"{len(sequences)} tag lines for {len(doc.tokens)} token lines"
        )
    out: set[PiiSpan] = set()
    for toks, seq in zip(doc.tokens, sequences):
        tags = seq.tags if isinstance(seq, BioSequence) else tuple(seq)
        if len(tags) != len(toks):
            raise ShapeError(f"{len(tags)} tags for {len(toks)} tokens")
        out.update(line_tags_to_spans(toks, tags, source, annotator_id))
    return out


# --- BIO file format -------------------------------------------------------
#
# UTF-8. Per document: a header line `# doc_id = <id>`, then one token per
# line as `surface<TAB>tag`, one blank line between text lines, two blank
# lines between documents, trailing newline. Text lines without tokens are
# not representable in this format and are skipped on write; readers see
# only the non-empty lines, in order.


def format_bio(docs: list[tuple[str, list[BioSequence]]]) -> str:
    chunks = []
    for doc_id, seqs in docs:
        body = "\n\n".join(
            "\n".join(f"{t.surface}\t{tag}" for t, tag in zip(s.tokens, s.tags))
            for s in seqs
            if len(s) > 0
        )
        chunks.append(f"# doc_id = {doc_id}\n{body}" if body else f"# doc_id = {doc_id}")
    return "\n\n\n".join(chunks) + "\n" if chunks else ""


def parse_bio(text: str) -> list[tuple[str, list[list[tuple[str, str]]]]]:
    """Parse the BIO file format into (doc_id, lines of (surface, tag))."""
    docs: list[tuple[str, list[list[tuple[str, str]]]]] = []
    cur_lines: list[list[tuple[str, str]]] | None = None
    cur_tokens: list[tuple[str, str]] = []

    def flush_line():
        nonlocal cur_tokens
        if cur_tokens:
            assert cur_lines is not None
            cur_lines.append(cur_tokens)
            cur_tokens = []

    for raw in text.split("\n"):
        if raw.startswith("# doc_id = "):
            flush_line()
            cur_lines = []
            docs.append((raw[len("# doc_id = "):], cur_lines))
        elif raw == "":
            flush_line()
        else:
            if cur_lines is None:
                raise ValueError("token line before any document header")
            surface, sep, tag = raw.partition("\t")
            if not sep or tag not in TAG_INDEX:
                raise ValueError(f"malformed BIO line: {raw!r}")
            cur_tokens.append((surface, tag))
    flush_line()
    return docs
