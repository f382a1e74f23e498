"""Annotation store with revisioned edits, adjudication, and agreement.

The store is an append-only JSONL file (one record per accepted write);
the latest record per (doc_id, annotator_id) wins on load. Writes are
serialized under a lock and guarded by optimistic revision checks, so a
stale client can never silently clobber a newer save.
"""
from __future__ import annotations

import json
import threading
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

from . import metrics
from .textcore import (
    CATEGORIES,
    Document,
    PiiSpan,
    check_no_overlap,
    format_bio,
    spans_to_bio,
)


class RevisionConflict(Exception):
    def __init__(self, expected: int, stored: int):
        super().__init__(f"expected revision {expected}, store has {stored}")
        self.expected = expected
        self.stored = stored


class UnknownDocument(KeyError):
    pass


class EmptyDomain(ValueError):
    """The restricted token set for a kappa computation is empty."""


class UnresolvedDisagreement(Exception):
    def __init__(self, regions: list[tuple[int, int]]):
        super().__init__(f"unresolved disagreement regions: {regions}")
        self.regions = regions


STATUSES = ("in_progress", "confirmed")


@dataclass(frozen=True)
class AnnotationRecord:
    doc_id: str
    annotator_id: str
    spans: tuple[PiiSpan, ...]
    revision: int
    status: str = "in_progress"

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        check_no_overlap(self.spans)

    def to_json_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "annotator_id": self.annotator_id,
            "revision": self.revision,
            "status": self.status,
            "spans": [
                {"start": s.start, "end": s.end, "category": s.category,
                 "source": s.source}
                for s in self.spans
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AnnotationRecord":
        return cls(
            doc_id=d["doc_id"],
            annotator_id=d["annotator_id"],
            spans=tuple(
                PiiSpan(s["start"], s["end"], s["category"],
                        s.get("source", "human"), d["annotator_id"])
                for s in d["spans"]
            ),
            revision=d["revision"],
            status=d["status"],
        )


class AnnotationStore:
    """Registry of documents plus persistent, revisioned annotations."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._docs: dict[str, Document] = {}
        self._records: dict[tuple[str, str], AnnotationRecord] = {}
        if self._path is not None and self._path.exists():
            for line in self._path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                rec = AnnotationRecord.from_json_dict(json.loads(line))
                self._records[(rec.doc_id, rec.annotator_id)] = rec

    # -- documents ----------------------------------------------------------

    def add_document(self, doc: Document) -> None:
        self._docs[doc.doc_id] = doc

    def document(self, doc_id: str) -> Document:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise UnknownDocument(doc_id) from None

    def doc_ids(self) -> list[str]:
        return sorted(self._docs)

    # -- records ------------------------------------------------------------

    def get(self, doc_id: str, annotator_id: str) -> AnnotationRecord | None:
        return self._records.get((doc_id, annotator_id))

    def records_for(self, annotator_id: str) -> list[AnnotationRecord]:
        return sorted(
            (r for (d, a), r in self._records.items() if a == annotator_id),
            key=lambda r: r.doc_id,
        )

    def annotator_ids(self) -> set[str]:
        return {a for (_, a) in self._records}

    def _validate_spans(self, doc: Document, spans: Iterable[PiiSpan]) -> tuple[PiiSpan, ...]:
        ordered = check_no_overlap(spans)
        for s in ordered:
            if s.end > len(doc.text):
                raise ValueError(f"span {s.triple()} outside document")
            li = doc.line_of(s.start)
            if s.end > doc.lines[li][1]:
                raise ValueError(f"span {s.triple()} crosses a line break")
        return tuple(ordered)

    def _persist(self, rec: AnnotationRecord) -> None:
        if self._path is None:
            return
        with self._path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec.to_json_dict(), ensure_ascii=False) + "\n")
            fh.flush()

    def save_annotation(
        self,
        doc_id: str,
        annotator_id: str,
        spans: Iterable[PiiSpan],
        expected_revision: int,
        status: str = "in_progress",
    ) -> int:
        """Write a record if expected_revision matches; returns the new
        revision. Confirming a record marks every span human-sourced."""
        doc = self.document(doc_id)
        with self._lock:
            stored = self._records.get((doc_id, annotator_id))
            stored_rev = stored.revision if stored else 0
            if expected_revision != stored_rev:
                raise RevisionConflict(expected_revision, stored_rev)
            ordered = self._validate_spans(doc, spans)
            if status == "confirmed":
                ordered = tuple(replace(s, source="human") for s in ordered)
            ordered = tuple(replace(s, annotator_id=annotator_id) for s in ordered)
            rec = AnnotationRecord(doc_id, annotator_id, ordered,
                                   stored_rev + 1, status)
            self._records[(doc_id, annotator_id)] = rec
            self._persist(rec)
            return rec.revision

    def ingest_pretag(
        self,
        doc_id: str,
        spans: Iterable[PiiSpan],
        annotator_id: str = "machine",
    ) -> AnnotationRecord:
        """Store model predictions as an in_progress machine record.

        Never auto-confirms and never overwrites confirmed records or
        records containing human-sourced spans; repeat ingestion of
        identical spans is a no-op.
        """
        doc = self.document(doc_id)
        with self._lock:
            stored = self._records.get((doc_id, annotator_id))
            machine = tuple(
                replace(s, source="machine", annotator_id=annotator_id)
                for s in self._validate_spans(doc, spans)
            )
            if stored is not None:
                protected = stored.status == "confirmed" or any(
                    s.source == "human" for s in stored.spans
                )
                if protected or stored.spans == machine:
                    return stored
            rec = AnnotationRecord(
                doc_id, annotator_id, machine,
                (stored.revision if stored else 0) + 1, "in_progress",
            )
            self._records[(doc_id, annotator_id)] = rec
            self._persist(rec)
            return rec

    def export_bio(
        self,
        doc_ids: Iterable[str] | None = None,
        annotator_id: str | None = None,
        only_confirmed: bool = True,
    ) -> str:
        """BIO file for the selected documents, ordered by doc_id.

        With annotator_id=None the record of the lexicographically first
        annotator holding an eligible record per document is used.
        """
        ids = sorted(doc_ids) if doc_ids is not None else self.doc_ids()
        out = []
        for doc_id in ids:
            doc = self.document(doc_id)
            candidates = sorted(
                (a for (d, a), r in self._records.items()
                 if d == doc_id
                 and (annotator_id is None or a == annotator_id)
                 and (not only_confirmed or r.status == "confirmed")),
            )
            if not candidates:
                continue
            rec = self._records[(doc_id, candidates[0])]
            out.append((doc_id, spans_to_bio(doc, rec.spans)))
        return format_bio(out)


# --- inter-annotator agreement ----------------------------------------------


def token_labels(doc: Document, spans: Iterable[PiiSpan]) -> list[str]:
    """Per-token category labels ("O" for untagged), B/I collapsed."""
    labels = []
    ordered = sorted(spans, key=lambda s: s.start)
    for toks in doc.tokens:
        for tok in toks:
            lab = "O"
            for s in ordered:
                if s.start >= tok.end:
                    break
                if s.end > tok.start:
                    lab = s.category
                    break
            labels.append(lab)
    return labels


def cohen_kappa(labels_a: list[str], labels_b: list[str]) -> float:
    if len(labels_a) != len(labels_b):
        raise ValueError("label sequences differ in length")
    n = len(labels_a)
    if n == 0:
        raise EmptyDomain("no tokens in scope")
    p_o = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    ca, cb = Counter(labels_a), Counter(labels_b)
    p_e = sum(ca[l] * cb[l] for l in ca) / (n * n)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def _paired_labels(
    docs: Iterable[Document],
    recs_a: Mapping[str, AnnotationRecord] | Mapping[str, Iterable[PiiSpan]],
    recs_b: Mapping[str, AnnotationRecord] | Mapping[str, Iterable[PiiSpan]],
) -> tuple[list[str], list[str]]:
    la: list[str] = []
    lb: list[str] = []

    def spans_of(m, doc_id):
        v = m.get(doc_id, ())
        return v.spans if isinstance(v, AnnotationRecord) else v

    for doc in docs:
        la.extend(token_labels(doc, spans_of(recs_a, doc.doc_id)))
        lb.extend(token_labels(doc, spans_of(recs_b, doc.doc_id)))
    return la, lb


def token_kappa(
    doc: Document,
    a: AnnotationRecord,
    b: AnnotationRecord,
    mode: str = "all",
) -> float:
    """Token-level Cohen's kappa between two annotations of one document.

    mode "annotated_only" restricts the computation to tokens labeled
    non-O by at least one of the two annotators.
    """
    return pooled_token_kappa([doc], {doc.doc_id: a}, {doc.doc_id: b}, mode)


def pooled_token_kappa(docs, recs_a, recs_b, mode: str = "all") -> float:
    if mode not in ("all", "annotated_only"):
        raise ValueError(f"unknown mode {mode!r}")
    la, lb = _paired_labels(docs, recs_a, recs_b)
    if mode == "annotated_only":
        pairs = [(x, y) for x, y in zip(la, lb) if x != "O" or y != "O"]
        if not pairs:
            raise EmptyDomain("no annotated tokens")
        la = [x for x, _ in pairs]
        lb = [y for _, y in pairs]
    return cohen_kappa(la, lb)


def iaa_f1(
    a: Iterable[PiiSpan] | Mapping[str, Iterable[PiiSpan]],
    b: Iterable[PiiSpan] | Mapping[str, Iterable[PiiSpan]],
) -> float:
    """Strict-entity micro-F1 treating a as gold and b as predictions.

    Symmetric under swapping the two annotators: matches are shared and
    the unmatched counts trade places between FP and FN.
    """
    ga = a if isinstance(a, Mapping) else {"": a}
    gb = b if isinstance(b, Mapping) else {"": b}
    return metrics.strict_entity_metrics(ga, gb).f1


@dataclass(frozen=True)
class IaaReport:
    kappa_all_tokens: float
    kappa_annotated_only: float | None
    f1_strict: float
    per_category_f1: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            "kappa_all_tokens": self.kappa_all_tokens,
            "kappa_annotated_only": self.kappa_annotated_only,
            "f1_strict": self.f1_strict,
            "per_category_f1": self.per_category_f1,
        }


def iaa_report(
    docs: list[Document],
    recs_a: Mapping[str, AnnotationRecord],
    recs_b: Mapping[str, AnnotationRecord],
) -> IaaReport:
    """Agreement over a document set: both kappa variants plus strict F1."""
    spans_a = {d: r.spans for d, r in recs_a.items()}
    spans_b = {d: r.spans for d, r in recs_b.items()}
    try:
        kap_ann = pooled_token_kappa(docs, recs_a, recs_b, "annotated_only")
    except EmptyDomain:
        kap_ann = None
    strict = metrics.strict_entity_metrics(spans_a, spans_b)
    return IaaReport(
        kappa_all_tokens=pooled_token_kappa(docs, recs_a, recs_b, "all"),
        kappa_annotated_only=kap_ann,
        f1_strict=strict.f1,
        per_category_f1={c: strict.per_category[c].f1 for c in CATEGORIES},
    )


# --- adjudication ------------------------------------------------------------


@dataclass(frozen=True)
class Disagreement:
    """One conflict group: overlapping-or-lone spans seen by only one side."""

    doc_id: str
    region: tuple[int, int]
    a_spans: tuple[PiiSpan, ...]
    b_spans: tuple[PiiSpan, ...]


def disagreements(a: AnnotationRecord, b: AnnotationRecord) -> list[Disagreement]:
    """Conflict groups between two records of the same document.

    Spans agreeing exactly in (start, end, category) are excluded; the
    rest are grouped into connected components under character overlap.
    """
    if a.doc_id != b.doc_id:
        raise ValueError("records belong to different documents")
    shared = {s.triple() for s in a.spans} & {s.triple() for s in b.spans}
    rest = sorted(
        [("a", s) for s in a.spans if s.triple() not in shared]
        + [("b", s) for s in b.spans if s.triple() not in shared],
        key=lambda p: (p[1].start, p[1].end),
    )
    groups: list[list[tuple[str, PiiSpan]]] = []
    reach = -1
    for side, s in rest:
        if s.start < reach:
            groups[-1].append((side, s))
        else:
            groups.append([(side, s)])
        reach = max(reach, s.end)
    return [
        Disagreement(
            doc_id=a.doc_id,
            region=(min(s.start for _, s in g), max(s.end for _, s in g)),
            a_spans=tuple(s for side, s in g if side == "a"),
            b_spans=tuple(s for side, s in g if side == "b"),
        )
        for g in groups
    ]


def adjudicate(
    a: AnnotationRecord,
    b: AnnotationRecord,
    decisions: Mapping[tuple[int, int], PiiSpan | None],
    annotator_id: str = "adjudicated",
) -> AnnotationRecord:
    """Merge two records into a confirmed gold record.

    Exact agreements carry over automatically. Every disagreement group
    must have a decision, keyed by its (min start, max end) region: the
    span to keep, or None to drop the region. Raises
    UnresolvedDisagreement listing regions without a decision.
    """
    conflicts = disagreements(a, b)
    missing = [c.region for c in conflicts if c.region not in decisions]
    if missing:
        raise UnresolvedDisagreement(missing)
    shared = {s.triple() for s in a.spans} & {s.triple() for s in b.spans}
    merged = [
        PiiSpan(t[0], t[1], t[2], "human", annotator_id) for t in sorted(shared)
    ]
    for c in conflicts:
        choice = decisions[c.region]
        if choice is not None:
            merged.append(replace(choice, source="human", annotator_id=annotator_id))
    return AnnotationRecord(
        doc_id=a.doc_id,
        annotator_id=annotator_id,
        spans=tuple(sorted(merged, key=lambda s: s.start)),
        revision=max(a.revision, b.revision) + 1,
        status="confirmed",
    )
