import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deidkit.textcore import (
    BIO_TAGS,
    CATEGORIES,
    BioSequence,
    CrossLineError,
    Document,
    OverlapError,
    PiiSpan,
    ShapeError,
    bio_to_spans,
    format_bio,
    parse_bio,
    repair_bio,
    spans_to_bio,
    tokenize,
)

from conftest import random_document, random_token_aligned_spans


def test_tag_set_shape():
    assert len(CATEGORIES) == 5
    assert len(BIO_TAGS) == 11
    assert BIO_TAGS[0] == "O"


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_mrn_line():
    [toks] = tokenize("MRN: 123456")
    assert [(t.surface, t.start, t.end) for t in toks] == [
        ("MRN", 0, 3), (":", 3, 4), ("123456", 5, 11)]


def test_tokenize_apostrophe():
    [toks] = tokenize("Dr Lastname's Room")
    assert [t.surface for t in toks] == ["Dr", "Lastname", "'", "s", "Room"]


def test_tokenize_offsets_are_faithful(rng):
    for _ in range(200):
        doc = random_document(rng)
        for li, toks in enumerate(doc.tokens):
            for t in toks:
                assert doc.text[t.start:t.end] == t.surface
            # concatenating surfaces with original gaps rebuilds the line
            s, e = doc.lines[li]
            rebuilt = list(doc.line_text(li))
            for t in toks:
                rebuilt[t.start - s:t.end - s] = t.surface
            assert "".join(rebuilt) == doc.line_text(li)


def test_tokenize_never_contains_whitespace(rng):
    for _ in range(100):
        doc = random_document(rng)
        for toks in doc.tokens:
            for t in toks:
                assert not any(ch.isspace() for ch in t.surface)


def test_spans_to_bio_simple():
    doc = Document.make("d", "MRN: 123456")
    seqs = spans_to_bio(doc, [PiiSpan(5, 11, "IDN")])
    assert seqs[0].tags == ("O", "O", "B-IDN")


def test_spans_to_bio_no_spans_all_o():
    doc = Document.make("d", "MRN: 123456")
    assert spans_to_bio(doc, [])[0].tags == ("O", "O", "O")


def test_spans_to_bio_expands_to_covering_token():
    doc = Document.make("d", "MRN: 123456")
    seqs = spans_to_bio(doc, [PiiSpan(5, 9, "IDN")])
    assert seqs[0].tags == ("O", "O", "B-IDN")


def test_spans_to_bio_multi_token():
    doc = Document.make("d", "seen by Amelia Huxley today")
    seqs = spans_to_bio(doc, [PiiSpan(8, 21, "PERSON")])
    assert seqs[0].tags == ("O", "O", "B-PERSON", "I-PERSON", "O")


def test_spans_to_bio_rejects_overlap():
    doc = Document.make("d", "MRN: 123456")
    with pytest.raises(OverlapError):
        spans_to_bio(doc, [PiiSpan(5, 11, "IDN"), PiiSpan(7, 10, "PHONE")])


def test_spans_to_bio_rejects_cross_line():
    doc = Document.make("d", "abc def\nghi")
    with pytest.raises(CrossLineError):
        spans_to_bio(doc, [PiiSpan(4, 10, "PERSON")])


def test_bio_to_spans_inverse():
    doc = Document.make("d", "MRN: 123456")
    spans = bio_to_spans(doc, [["O", "O", "B-IDN"]])
    assert {s.triple() for s in spans} == {(5, 11, "IDN")}


def test_bio_to_spans_all_o_empty():
    doc = Document.make("d", "MRN: 123456")
    assert bio_to_spans(doc, [["O", "O", "O"]]) == set()


def test_bio_to_spans_shape_error():
    doc = Document.make("d", "MRN: 123456")
    with pytest.raises(ShapeError):
        bio_to_spans(doc, [["O", "O"]])
    with pytest.raises(ShapeError):
        bio_to_spans(doc, [])


def test_roundtrip_random_docs(rng):
    for _ in range(300):
        doc = random_document(rng)
        spans = random_token_aligned_spans(doc, rng)
        got = bio_to_spans(doc, spans_to_bio(doc, spans))
        assert {s.triple() for s in got} == {s.triple() for s in spans}


@pytest.mark.parametrize("tags,expected", [
    (["O", "I-PERSON"], ["O", "B-PERSON"]),
    (["B-IDN", "I-PHONE"], ["B-IDN", "B-PHONE"]),
    (["B-PERSON", "I-PERSON"], ["B-PERSON", "I-PERSON"]),
    (["I-DOB"], ["B-DOB"]),
    ([], []),
])
def test_repair_bio_cases(tags, expected):
    assert list(repair_bio(tags)) == expected


tag_seqs = st.lists(st.sampled_from(BIO_TAGS), max_size=12)


@given(tag_seqs)
def test_repair_bio_idempotent(tags):
    once = repair_bio(tags)
    assert repair_bio(once) == once


@given(tag_seqs)
def test_repair_bio_preserves_o_partition(tags):
    repaired = repair_bio(tags)
    assert [t == "O" for t in tags] == [t == "O" for t in repaired]


@given(tag_seqs)
def test_repair_bio_output_legal(tags):
    repaired = repair_bio(tags)
    prev = "O"
    for t in repaired:
        if t.startswith("I-"):
            assert prev in (f"B-{t[2:]}", f"I-{t[2:]}")
        prev = t


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_spans_to_bio_always_legal(seed):
    rng = random.Random(seed)
    doc = random_document(rng)
    spans = random_token_aligned_spans(doc, rng)
    for seq in spans_to_bio(doc, spans):
        assert repair_bio(seq.tags) == seq.tags


# --- BIO file format ----------------------------------------------------------

EXPECTED_BIO = (
    "# doc_id = a\n"
    "MRN\tO\n"
    ":\tO\n"
    "123456\tB-IDN\n"
    "\n"
    "ward\tO\n"
    "\n"
    "\n"
    "# doc_id = b\n"
    "Dr\tO\n"
    "Huxley\tB-PERSON\n"
)


def test_format_bio_bit_exact():
    a = Document.make("a", "MRN: 123456\nward")
    b = Document.make("b", "Dr Huxley")
    text = format_bio([
        ("a", spans_to_bio(a, [PiiSpan(5, 11, "IDN")])),
        ("b", spans_to_bio(b, [PiiSpan(3, 9, "PERSON")])),
    ])
    assert text == EXPECTED_BIO


def test_parse_bio_roundtrip():
    docs = parse_bio(EXPECTED_BIO)
    assert docs == [
        ("a", [[("MRN", "O"), (":", "O"), ("123456", "B-IDN")],
               [("ward", "O")]]),
        ("b", [[("Dr", "O"), ("Huxley", "B-PERSON")]]),
    ]


def test_format_bio_skips_empty_lines():
    doc = Document.make("a", "\nMRN: 123456\n\n")
    text = format_bio([("a", spans_to_bio(doc, []))])
    assert text == "# doc_id = a\nMRN\tO\n:\tO\n123456\tO\n"


def test_format_parse_roundtrip_random(rng):
    for i in range(50):
        doc = random_document(rng, doc_id=f"doc{i}")
        spans = random_token_aligned_spans(doc, rng)
        seqs = spans_to_bio(doc, spans)
        parsed = parse_bio(format_bio([(doc.doc_id, seqs)]))
        assert parsed == [(doc.doc_id,
                           [[(t.surface, tag) for t, tag in
                             zip(s.tokens, s.tags)] for s in seqs if s.tokens])]


def test_parse_bio_rejects_malformed():
    with pytest.raises(ValueError):
        parse_bio("# doc_id = a\nword NO_TAB_TAG\n")
    with pytest.raises(ValueError):
        parse_bio("# doc_id = a\nword\tB-WRONG\n")
    with pytest.raises(ValueError):
        parse_bio("word\tO\n")


def test_bio_sequence_validation():
    doc = Document.make("d", "a b")
    with pytest.raises(ShapeError):
        BioSequence(doc.tokens[0], ("O",))
    with pytest.raises(ValueError):
        BioSequence(doc.tokens[0], ("O", "B-NOPE"))


def test_document_line_of():
    doc = Document.make("d", "abc\ndef")
    assert doc.line_of(0) == 0
    assert doc.line_of(4) == 1
    with pytest.raises(ValueError):
        doc.line_of(99)
