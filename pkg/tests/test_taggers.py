import itertools
import math
import random

import pytest

from deidkit.datasets import (
    CorpusEntry,
    LabeledCorpus,
    LabeledDoc,
    SynthConfig,
    build_training_sets,
    corpus_from_docs,
    generate_synthetic,
    split_plan,
)
from deidkit.taggers import (
    GazetteerTagger,
    ImportedTagger,
    MissingPrediction,
    PatternTagger,
    PerceptronTagger,
    UntrainedModel,
    EmptyTrainingSet,
    build_model_bank,
    export_predictions,
    imported_from_text,
    legal_transition,
    line_features,
    load_imported,
    load_model,
    save_model,
    score_on_docs,
    train_perceptron,
    viterbi_decode,
)
from deidkit.textcore import (
    BIO_TAGS,
    Document,
    PiiSpan,
    Token,
    bio_to_spans,
    repair_bio,
    tokenize_line,
)

NEG_INF = float("-inf")


def brute_force_best(emissions, start, trans):
    """Enumerate every tag sequence; return the maximal total score."""
    n = len(emissions)
    k = len(emissions[0])
    best = NEG_INF
    for seq in itertools.product(range(k), repeat=n):
        s = start[seq[0]] + emissions[0][seq[0]]
        for t in range(1, n):
            s += trans[seq[t - 1]][seq[t]] + emissions[t][seq[t]]
        best = max(best, s)
    return best


def path_score(path, emissions, start, trans):
    s = start[path[0]] + emissions[0][path[0]]
    for t in range(1, len(path)):
        s += trans[path[t - 1]][path[t]] + emissions[t][path[t]]
    return s


def test_viterbi_matches_brute_force_500_lattices():
    rng = random.Random(99)
    for _ in range(500):
        n = rng.randint(1, 6)
        k = rng.randint(2, 5)
        emissions = [[rng.uniform(-5, 5) for _ in range(k)] for _ in range(n)]
        start = [rng.uniform(-5, 5) for _ in range(k)]
        trans = [[NEG_INF if rng.random() < 0.15 else rng.uniform(-5, 5)
                  for _ in range(k)] for _ in range(k)]
        path, score = viterbi_decode(emissions, start, trans)
        expected = brute_force_best(emissions, start, trans)
        assert score == pytest.approx(expected, abs=1e-9)
        if math.isfinite(score):
            assert path_score(path, emissions, start, trans) == \
                pytest.approx(score, abs=1e-9)


def test_viterbi_single_token_argmax():
    emissions = [[1.0, 3.0, 2.0]]
    path, score = viterbi_decode(emissions, [0.0, 0.0, 0.0], [[0.0] * 3] * 3)
    assert path == [1] and score == 3.0


def test_viterbi_ties_to_lowest_index():
    emissions = [[0.0, 0.0], [0.0, 0.0]]
    path, _ = viterbi_decode(emissions, [0.0, 0.0], [[0.0, 0.0], [0.0, 0.0]])
    assert path == [0, 0]


def test_viterbi_empty():
    assert viterbi_decode([], [], []) == ([], 0.0)


def test_legal_transition_rules():
    assert not legal_transition("O", "I-PERSON")
    assert not legal_transition("<s>", "I-IDN")
    assert not legal_transition("B-IDN", "I-PHONE")
    assert legal_transition("B-IDN", "I-IDN")
    assert legal_transition("I-IDN", "I-IDN")
    assert legal_transition("O", "B-PERSON")
    assert legal_transition("<s>", "O")


def test_illegal_transition_never_decoded(rng):
    # random perceptron weights can never produce O -> I-X
    docs = generate_synthetic(SynthConfig(n_docs=3, seed=1))
    emissions = {t: {} for t in BIO_TAGS}
    model = PerceptronTagger("p", emissions, {})
    for ld in docs:
        for seq in model.tag(ld.doc):
            prev = "O"
            for t in seq.tags:
                if t.startswith("I-"):
                    assert prev in (f"B-{t[2:]}", f"I-{t[2:]}")
                prev = t


# --- perceptron -----------------------------------------------------------------


def _line_entry(doc_id, i, text, tags):
    toks = tokenize_line(text)
    return CorpusEntry(doc_id, i, text, toks, tuple(tags))


def _mrn_corpus(n=60):
    """Separable fixture: all-digit tokens right after 'MRN :' are IDN."""
    rng = random.Random(5)
    entries = []
    for i in range(n):
        num = str(rng.randint(100000, 999999))
        if i % 2 == 0:
            text = f"MRN: {num}"
            tags = ("O", "O", "B-IDN")
        else:
            text = f"ward {num}"
            tags = ("O", "O")
        entries.append(_line_entry(f"d{i}", 0, text, tags))
    return LabeledCorpus("mrn", tuple(entries), "synthetic")


def test_perceptron_converges_on_separable_fixture():
    corpus = _mrn_corpus()
    model = train_perceptron(corpus, None, epochs=10, seed=0)
    for e in corpus.entries:
        doc = Document.make(e.doc_id, e.text)
        assert model.tag(doc)[0].tags == e.tags


def test_perceptron_zero_epochs_predicts_all_o():
    model = train_perceptron(_mrn_corpus(), None, epochs=0, seed=0)
    doc = Document.make("d", "MRN: 123456")
    assert model.tag(doc)[0].tags == ("O", "O", "O")


def test_perceptron_deterministic_under_seed():
    corpus = _mrn_corpus()
    m1 = train_perceptron(corpus, None, epochs=3, seed=7)
    m2 = train_perceptron(corpus, None, epochs=3, seed=7)
    assert m1.parameters() == m2.parameters()


def test_perceptron_empty_training_set():
    with pytest.raises(EmptyTrainingSet):
        train_perceptron(LabeledCorpus("e", (), "original"), None, 1, 0)


def test_perceptron_untrained_rejected():
    with pytest.raises(UntrainedModel):
        PerceptronTagger("p", None, {})


def test_tag_deterministic_and_pure():
    docs = generate_synthetic(SynthConfig(n_docs=2, seed=3))
    model = PatternTagger()
    text_before = docs[0].doc.text
    assert model.tag(docs[0].doc) == model.tag(docs[0].doc)
    assert docs[0].doc.text == text_before


def test_tag_empty_document():
    assert PatternTagger().tag(Document.make("d", "")) == []


def test_line_features_deterministic():
    toks = tokenize_line("MRN: 123456")
    assert line_features(toks) == line_features(toks)
    feats = line_features(toks)[2]
    assert "isdig" in feats and "dlen=6" in feats


# --- pattern tagger ---------------------------------------------------------------


def _single_line_spans(tagger, text):
    doc = Document.make("d", text)
    return {s.triple() for s in
            bio_to_spans(doc, tagger.tag(doc), source="machine")}


def test_pattern_phone_with_cue():
    spans = _single_line_spans(PatternTagger(), "Ph: 9123 4567")
    assert (4, 13, "PHONE") in spans


def test_pattern_phone_bare_and_mobile():
    assert _single_line_spans(PatternTagger(), "call 9123 4567 now") == \
        {(5, 14, "PHONE")}
    assert (5, 17, "PHONE") in _single_line_spans(
        PatternTagger(), "mob: 0412 345 678")


def test_pattern_idn_needs_cue():
    assert _single_line_spans(PatternTagger(), "MRN: 123456") == \
        {(5, 11, "IDN")}
    assert _single_line_spans(PatternTagger(), "value 123456") == set()


def test_pattern_dob_needs_cue():
    assert _single_line_spans(PatternTagger(), "DOB: 11-11-2025") == \
        {(5, 15, "DOB")}
    assert _single_line_spans(PatternTagger(), "Review on 11-11-2025") == set()


def test_pattern_knows_nothing_about_person():
    assert _single_line_spans(PatternTagger(), "Dr Amelia Huxley") == set()


# --- gazetteer tagger ---------------------------------------------------------------


def test_gazetteer_person_run():
    spans = _single_line_spans(GazetteerTagger(), "seen by Amelia Huxley today")
    assert spans == {(8, 21, "PERSON")}


def test_gazetteer_requires_capitalization():
    assert _single_line_spans(GazetteerTagger(), "amelia huxley") == set()


def test_gazetteer_street_address():
    spans = _single_line_spans(GazetteerTagger(),
                               "lives at 12 Waratah Street, Glenfield now")
    assert spans == {(9, 37, "ADDRESS")}


def test_gazetteer_lone_suburb():
    spans = _single_line_spans(GazetteerTagger(), "Discharged home to Glenfield.")
    assert spans == {(19, 28, "ADDRESS")}


# --- imported predictions --------------------------------------------------------


def test_import_roundtrips_byte_exact(tmp_path):
    docs = [ld.doc for ld in generate_synthetic(SynthConfig(n_docs=5, seed=9))]
    source = PatternTagger()
    text = export_predictions(source, docs)
    path = tmp_path / "preds.bio"
    path.write_text(text, encoding="utf-8")
    imported = load_imported(path)
    assert export_predictions(imported, docs) == text
    for doc in docs:
        assert imported.tag(doc) == source.tag(doc)


def test_import_uncovered_doc_raises():
    imported = imported_from_text("# doc_id = a\nword\tO\n")
    with pytest.raises(MissingPrediction):
        imported.tag(Document.make("b", "word"))


def test_import_checks_token_alignment():
    imported = imported_from_text("# doc_id = a\nword\tO\n")
    with pytest.raises(MissingPrediction):
        imported.tag(Document.make("a", "word word"))
    with pytest.raises(MissingPrediction):
        imported.tag(Document.make("a", "other"))


def test_import_repairs_illegal_bio():
    imported = imported_from_text("# doc_id = a\nword\tI-IDN\n")
    [seq] = imported.tag(Document.make("a", "word"))
    assert seq.tags == ("B-IDN",)


# --- persistence and the bank ------------------------------------------------------


def _tiny_world(n_docs=40, seed=13):
    docs = generate_synthetic(SynthConfig(n_docs=n_docs, seed=seed))
    plan = split_plan([ld.doc.doc_id for ld in docs], seed, n_docs - 16, 8)
    by_id = {ld.doc.doc_id: ld for ld in docs}
    train = [by_id[i] for i in plan.train]
    dev = [by_id[i] for i in plan.dev]
    test = [by_id[i] for i in plan.test]
    corpus = corpus_from_docs("train", train)
    bal = build_training_sets(corpus, "balanced", seed)
    imb = build_training_sets(corpus, "imbalanced", seed)
    return bal, imb, dev, test


def test_model_save_load_identical_predictions(tmp_path):
    bal, imb, dev, test = _tiny_world()
    model = train_perceptron(bal, dev, epochs=3, seed=0)
    save_model(model, tmp_path / "m.json")
    loaded = load_model(tmp_path / "m.json")
    assert loaded.dev_scores == model.dev_scores
    for ld in test:
        assert loaded.tag(ld.doc) == model.tag(ld.doc)
    for tagger in (PatternTagger(), GazetteerTagger()):
        save_model(tagger, tmp_path / "t.json")
        loaded = load_model(tmp_path / "t.json")
        for ld in test:
            assert loaded.tag(ld.doc) == tagger.tag(ld.doc)


def test_build_model_bank_contract():
    bal, imb, dev, _ = _tiny_world()
    bank = build_model_bank(bal, imb, dev, epochs=2, seed=0)
    assert len(bank) == 4  # 1 trainable kind x 2 datasets + 2 static kinds
    assert {t.tagger_id for t in bank} == {
        "perceptron-balanced", "perceptron-imbalanced", "pattern",
        "gazetteer"}
    for t in bank:
        assert t.dev_scores is not None
        assert all(0.0 <= v <= 1.0 for v in t.dev_scores)
    modes = {t.tagger_id: t.training_mode for t in bank}
    assert modes["perceptron-balanced"] == "balanced"
    assert modes["perceptron-imbalanced"] == "imbalanced"
    assert modes["pattern"] == modes["gazetteer"] == "n/a"


def test_score_on_docs_matches_strict_metrics():
    from deidkit.metrics import strict_entity_metrics
    _, _, dev, _ = _tiny_world()
    tagger = PatternTagger()
    scores = score_on_docs(tagger, dev)
    gold = {ld.doc.doc_id: ld.spans for ld in dev}
    pred = {ld.doc.doc_id: tagger.predict_spans(ld.doc) for ld in dev}
    rep = strict_entity_metrics(gold, pred)
    assert scores == (rep.precision, rep.recall, rep.f1)
