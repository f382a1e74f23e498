"""Strict-entity and binary-token scoring, error taxonomy, cross-validation.

Zero-denominator convention: precision and recall are 1.0 when their
denominator is 0 (a perfectly empty prediction against empty gold is not
penalized); F1 is 0.0 when precision + recall == 0. The convention is
flagged in serialized reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .textcore import CATEGORIES, Document, PiiSpan


class TooFewFolds(ValueError):
    pass


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn) if tp + fn else 1.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


@dataclass(frozen=True)
class CategoryScore:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "CategoryScore":
        return cls(tp, fp, fn, *_prf(tp, fp, fn))


@dataclass(frozen=True)
class MetricsReport:
    mode: str  # strict_entity | binary_token
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    per_category: dict[str, CategoryScore] = field(default_factory=dict)

    @classmethod
    def from_counts(cls, mode, tp, fp, fn, per_category=None) -> "MetricsReport":
        return cls(mode, tp, fp, fn, *_prf(tp, fp, fn), per_category or {})

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "micro": {
                "tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1,
            },
            "per_category": {
                c: {
                    "tp": s.tp, "fp": s.fp, "fn": s.fn,
                    "precision": s.precision, "recall": s.recall, "f1": s.f1,
                }
                for c, s in self.per_category.items()
            },
            "vacuous_prf_is_one": True,
        }


SpanMap = Mapping[str, Iterable[PiiSpan]]


def _triples(spans: Iterable[PiiSpan]) -> set[tuple[int, int, str]]:
    return {s.triple() for s in spans}


def strict_entity_metrics(gold: SpanMap, pred: SpanMap) -> MetricsReport:
    """Micro P/R/F1 where a prediction counts only on exact (start, end,
    category) equality with a gold span. Per-category components included."""
    cat_tp = {c: 0 for c in CATEGORIES}
    cat_fp = {c: 0 for c in CATEGORIES}
    cat_fn = {c: 0 for c in CATEGORIES}
    for doc_id in set(gold) | set(pred):
        g = _triples(gold.get(doc_id, ()))
        p = _triples(pred.get(doc_id, ()))
        for (_, _, c) in g & p:
            cat_tp[c] += 1
        for (_, _, c) in p - g:
            cat_fp[c] += 1
        for (_, _, c) in g - p:
            cat_fn[c] += 1
    per_cat = {
        c: CategoryScore.from_counts(cat_tp[c], cat_fp[c], cat_fn[c])
        for c in CATEGORIES
    }
    return MetricsReport.from_counts(
        "strict_entity",
        sum(cat_tp.values()), sum(cat_fp.values()), sum(cat_fn.values()),
        per_cat,
    )


def _pii_tokens(doc: Document, spans: Iterable[PiiSpan]) -> set[tuple[int, int]]:
    """(line, token) indices of tokens covered by any span, category-blind."""
    covered = set()
    ordered = sorted(spans, key=lambda s: s.start)
    for li, toks in enumerate(doc.tokens):
        for ti, tok in enumerate(toks):
            for s in ordered:
                if s.start >= tok.end:
                    break
                if s.end > tok.start:
                    covered.add((li, ti))
                    break
    return covered


def binary_token_metrics(
    gold: SpanMap, pred: SpanMap, docs: Mapping[str, Document]
) -> MetricsReport:
    """Token-level PII-vs-non-PII detection scores; categories ignored."""
    tp = fp = fn = 0
    for doc_id, doc in docs.items():
        g = _pii_tokens(doc, gold.get(doc_id, ()))
        p = _pii_tokens(doc, pred.get(doc_id, ()))
        tp += len(g & p)
        fp += len(p - g)
        fn += len(g - p)
    return MetricsReport.from_counts("binary_token", tp, fp, fn)


@dataclass(frozen=True)
class TaxonomyBuckets:
    fp_bm: int = 0
    fp_cm: int = 0
    fp_wt: int = 0
    fn_bm: int = 0
    fn_cm: int = 0
    fn_nt: int = 0


@dataclass(frozen=True)
class ErrorTaxonomy:
    """FP/FN error buckets per category.

    FP: BM = overlaps same-category gold with differing boundaries,
    CM = overlaps gold of another category, WT = overlaps no gold.
    FN: BM / CM analogously against predictions, NT = overlaps no
    prediction. Same-category overlap is checked before cross-category;
    every error lands in exactly one bucket, so bucket sums reconcile
    with the strict report's FP/FN counts.
    """

    per_category: dict[str, TaxonomyBuckets]

    def totals(self) -> TaxonomyBuckets:
        return TaxonomyBuckets(*[
            sum(getattr(b, f) for b in self.per_category.values())
            for f in ("fp_bm", "fp_cm", "fp_wt", "fn_bm", "fn_cm", "fn_nt")
        ])

    def to_json_dict(self) -> dict:
        t = self.totals()
        return {
            "per_category": {c: vars(b) for c, b in self.per_category.items()},
            "totals": vars(t),
        }


def _overlaps(a: tuple[int, int, str], b: tuple[int, int, str]) -> bool:
    return a[0] < b[1] and a[1] > b[0]


def _bucket(err, others) -> str:
    # err is an unmatched triple, so a same-category overlap necessarily
    # has differing boundaries.
    if any(o[2] == err[2] and _overlaps(err, o) for o in others):
        return "bm"
    if any(o[2] != err[2] and _overlaps(err, o) for o in others):
        return "cm"
    return "none"


def error_taxonomy(gold: SpanMap, pred: SpanMap) -> ErrorTaxonomy:
    counts = {c: {k: 0 for k in ("fp_bm", "fp_cm", "fp_wt", "fn_bm", "fn_cm", "fn_nt")}
              for c in CATEGORIES}
    for doc_id in set(gold) | set(pred):
        g = _triples(gold.get(doc_id, ()))
        p = _triples(pred.get(doc_id, ()))
        for err in p - g:
            kind = _bucket(err, g)
            key = {"bm": "fp_bm", "cm": "fp_cm", "none": "fp_wt"}[kind]
            counts[err[2]][key] += 1
        for err in g - p:
            kind = _bucket(err, p)
            key = {"bm": "fn_bm", "cm": "fn_cm", "none": "fn_nt"}[kind]
            counts[err[2]][key] += 1
    return ErrorTaxonomy({c: TaxonomyBuckets(**v) for c, v in counts.items()})


@dataclass(frozen=True)
class CrossvalSummary:
    n_folds: int
    precision: tuple[float, float]  # (mean, sample SD)
    recall: tuple[float, float]
    f1: tuple[float, float]

    def to_json_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "precision": {"mean": self.precision[0], "sd": self.precision[1]},
            "recall": {"mean": self.recall[0], "sd": self.recall[1]},
            "f1": {"mean": self.f1[0], "sd": self.f1[1]},
        }


def mean_sd(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def crossval_report(fold_reports: list[MetricsReport]) -> CrossvalSummary:
    """Arithmetic mean and sample SD (n-1) of P/R/F1 across folds."""
    if len(fold_reports) < 2:
        raise TooFewFolds(f"need >= 2 folds, got {len(fold_reports)}")
    return CrossvalSummary(
        n_folds=len(fold_reports),
        precision=mean_sd([r.precision for r in fold_reports]),
        recall=mean_sd([r.recall for r in fold_reports]),
        f1=mean_sd([r.f1 for r in fold_reports]),
    )
