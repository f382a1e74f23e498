import math
import random

import pytest

from deidkit.metrics import (
    MetricsReport,
    TooFewFolds,
    binary_token_metrics,
    crossval_report,
    error_taxonomy,
    mean_sd,
    strict_entity_metrics,
)
from deidkit.textcore import CATEGORIES, Document, PiiSpan

from conftest import random_document, random_spans


def brute_force_strict(gold, pred):
    """Independent oracle: exact triple set-intersection per document."""
    tp = fp = fn = 0
    for doc_id in set(gold) | set(pred):
        g = {(s.start, s.end, s.category) for s in gold.get(doc_id, ())}
        p = {(s.start, s.end, s.category) for s in pred.get(doc_id, ())}
        tp += len(g & p)
        fp += len(p - g)
        fn += len(g - p)
    return tp, fp, fn


def test_strict_perfect():
    gold = {"d": [PiiSpan(0, 5, "PERSON")]}
    rep = strict_entity_metrics(gold, gold)
    assert (rep.precision, rep.recall, rep.f1) == (1.0, 1.0, 1.0)


def test_strict_hand_fixture():
    gold = {"d": [PiiSpan(0, 5, "PERSON"), PiiSpan(10, 16, "IDN")]}
    pred = {"d": [PiiSpan(0, 5, "PERSON"), PiiSpan(10, 14, "IDN"),
                  PiiSpan(20, 24, "PHONE")]}
    rep = strict_entity_metrics(gold, pred)
    assert (rep.tp, rep.fp, rep.fn) == (1, 2, 1)
    assert rep.precision == pytest.approx(1 / 3)
    assert rep.recall == pytest.approx(1 / 2)
    assert rep.f1 == pytest.approx(0.4)


def test_strict_empty_convention():
    rep = strict_entity_metrics({"d": []}, {"d": []})
    assert (rep.precision, rep.recall, rep.f1) == (1.0, 1.0, 0.0) or \
           (rep.precision, rep.recall) == (1.0, 1.0)
    # vacuous P and R are 1.0; harmonic mean of (1, 1) is 1
    assert rep.f1 == 1.0


def test_strict_matches_oracle_randomized():
    rng = random.Random(1234)
    for _ in range(1000):
        gold, pred = {}, {}
        for d in range(rng.randint(1, 3)):
            doc = random_document(rng, doc_id=f"doc{d}")
            gold[doc.doc_id] = random_spans(doc, rng)
            pred[doc.doc_id] = random_spans(doc, rng)
        rep = strict_entity_metrics(gold, pred)
        assert (rep.tp, rep.fp, rep.fn) == brute_force_strict(gold, pred)


def test_strict_micro_equals_category_sums(rng):
    for _ in range(100):
        doc = random_document(rng)
        gold = {doc.doc_id: random_spans(doc, rng)}
        pred = {doc.doc_id: random_spans(doc, rng)}
        rep = strict_entity_metrics(gold, pred)
        assert rep.tp == sum(c.tp for c in rep.per_category.values())
        assert rep.fp == sum(c.fp for c in rep.per_category.values())
        assert rep.fn == sum(c.fn for c in rep.per_category.values())


def test_strict_permutation_invariant(rng):
    docs = [random_document(rng, doc_id=f"doc{i}") for i in range(4)]
    gold = {d.doc_id: random_spans(d, rng) for d in docs}
    pred = {d.doc_id: random_spans(d, rng) for d in docs}
    rep1 = strict_entity_metrics(gold, pred)
    shuffled_gold = dict(reversed(list(gold.items())))
    shuffled_pred = dict(reversed(list(pred.items())))
    rep2 = strict_entity_metrics(shuffled_gold, shuffled_pred)
    assert rep1 == rep2


# --- binary token mode ---------------------------------------------------------


def test_binary_hand_fixture():
    # tokens 0..5; gold covers tokens 3,4; pred covers 4,5
    doc = Document.make("d", "t0 t1 t2 t3 t4 t5")
    toks = doc.tokens[0]
    gold = {"d": [PiiSpan(toks[3].start, toks[4].end, "PERSON")]}
    pred = {"d": [PiiSpan(toks[4].start, toks[5].end, "PERSON")]}
    rep = binary_token_metrics(gold, pred, {"d": doc})
    assert (rep.tp, rep.fp, rep.fn) == (1, 1, 1)
    assert rep.precision == rep.recall == rep.f1 == 0.5


def test_binary_perfect():
    doc = Document.make("d", "a b c")
    gold = {"d": [PiiSpan(0, 1, "IDN")]}
    rep = binary_token_metrics(gold, gold, {"d": doc})
    assert rep.precision == rep.recall == rep.f1 == 1.0


def test_binary_ignores_category():
    doc = Document.make("d", "a b c")
    gold = {"d": [PiiSpan(0, 1, "IDN")]}
    pred = {"d": [PiiSpan(0, 1, "PHONE")]}
    rep = binary_token_metrics(gold, pred, {"d": doc})
    assert rep.f1 == 1.0


def test_binary_boundary_mismatch_still_counts_tokens():
    # strict scores FP+FN for a boundary mismatch; token level still
    # credits the overlapping tokens
    doc = Document.make("d", "Amelia Huxley Ward")
    gold = {"d": [PiiSpan(0, 13, "PERSON")]}
    pred = {"d": [PiiSpan(0, 18, "PERSON")]}
    strict = strict_entity_metrics(gold, pred)
    assert (strict.tp, strict.fp, strict.fn) == (0, 1, 1)
    binary = binary_token_metrics(gold, pred, {"d": doc})
    assert binary.tp == 2 and binary.fn == 0 and binary.fp == 1


def test_strict_tp_entities_contribute_only_token_tp(rng):
    # every strict TP entity's tokens are gold-covered and pred-covered
    for _ in range(50):
        doc = random_document(rng)
        gold = random_spans(doc, rng)
        pred = list(gold)
        rep = binary_token_metrics({doc.doc_id: gold}, {doc.doc_id: pred},
                                   {doc.doc_id: doc})
        assert rep.fp == 0 and rep.fn == 0


# --- error taxonomy -------------------------------------------------------------


def test_taxonomy_boundary_mismatch():
    gold = {"d": [PiiSpan(10, 16, "IDN")]}
    pred = {"d": [PiiSpan(10, 14, "IDN")]}
    tax = error_taxonomy(gold, pred).per_category["IDN"]
    assert tax.fp_bm == 1 and tax.fn_bm == 1
    assert tax.fp_cm == tax.fp_wt == tax.fn_cm == tax.fn_nt == 0


def test_taxonomy_wrong_tag():
    pred = {"d": [PiiSpan(20, 24, "PHONE")]}
    tax = error_taxonomy({"d": []}, pred).per_category["PHONE"]
    assert tax.fp_wt == 1


def test_taxonomy_category_mismatch():
    gold = {"d": [PiiSpan(0, 5, "ADDRESS")]}
    pred = {"d": [PiiSpan(0, 5, "IDN")]}
    tax = error_taxonomy(gold, pred)
    assert tax.per_category["IDN"].fp_cm == 1
    assert tax.per_category["ADDRESS"].fn_cm == 1


def test_taxonomy_non_tagged():
    gold = {"d": [PiiSpan(0, 5, "PERSON")]}
    tax = error_taxonomy(gold, {"d": []}).per_category["PERSON"]
    assert tax.fn_nt == 1


def test_taxonomy_same_category_checked_first():
    # prediction overlaps both a same-category gold (other boundaries)
    # and a different-category gold: BM wins
    gold = {"d": [PiiSpan(0, 4, "PERSON"), PiiSpan(5, 8, "IDN")]}
    pred = {"d": [PiiSpan(2, 7, "PERSON")]}
    tax = error_taxonomy(gold, pred)
    assert tax.per_category["PERSON"].fp_bm == 1
    assert tax.per_category["PERSON"].fp_cm == 0


def test_taxonomy_reconciles_with_metrics(rng):
    for _ in range(300):
        doc = random_document(rng)
        gold = {doc.doc_id: random_spans(doc, rng)}
        pred = {doc.doc_id: random_spans(doc, rng)}
        rep = strict_entity_metrics(gold, pred)
        tax = error_taxonomy(gold, pred)
        for c in CATEGORIES:
            b = tax.per_category[c]
            assert b.fp_bm + b.fp_cm + b.fp_wt == rep.per_category[c].fp
            assert b.fn_bm + b.fn_cm + b.fn_nt == rep.per_category[c].fn


# --- cross-validation ------------------------------------------------------------


def _fold(p, r, f1):
    return MetricsReport("strict_entity", 0, 0, 0, p, r, f1)


def test_crossval_identical_folds_zero_sd():
    rep = crossval_report([_fold(0.9, 0.9, 0.9)] * 4)
    assert rep.f1 == (pytest.approx(0.9), pytest.approx(0.0))


def test_crossval_two_folds_hand_value():
    rep = crossval_report([_fold(1, 1, 0.96), _fold(1, 1, 0.98)])
    mean, sd = rep.f1
    assert mean == pytest.approx(0.97)
    assert sd == pytest.approx(math.sqrt(((0.96 - 0.97) ** 2 +
                                          (0.98 - 0.97) ** 2) / 1))
    assert sd == pytest.approx(0.0141421356, abs=1e-9)


def test_crossval_table_s6_values():
    f1s = [97.78, 96.47, 96.92, 96.5, 98.39, 98.03, 97.92, 97.21, 98.03,
           97.58]
    mean, sd = mean_sd(f1s)
    assert round(mean, 2) == 97.48
    assert round(sd, 2) == 0.67


def test_crossval_too_few_folds():
    with pytest.raises(TooFewFolds):
        crossval_report([_fold(1, 1, 1)])
