import random

import pytest

from deidkit.textcore import CATEGORIES, Document, PiiSpan

WORDS = ("MRN", "FIN", "Dr", "ward", "pain", "123456", "9123", "4567",
         "Amelia", "Huxley", "review", "x", "12", "Street", ":", ",")


def random_document(rng: random.Random, max_lines: int = 5,
                    doc_id: str = "d") -> Document:
    lines = []
    for _ in range(rng.randint(0, max_lines)):
        n = rng.randint(0, 8)
        lines.append(" ".join(rng.choice(WORDS) for _ in range(n)))
    return Document.make(doc_id, "\n".join(lines))


def random_token_aligned_spans(doc: Document, rng: random.Random,
                               p_span: float = 0.35) -> list[PiiSpan]:
    """Non-overlapping spans snapped to token boundaries."""
    spans = []
    for toks in doc.tokens:
        i = 0
        while i < len(toks):
            if rng.random() < p_span:
                j = min(len(toks), i + rng.randint(1, 3))
                spans.append(PiiSpan(toks[i].start, toks[j - 1].end,
                                     rng.choice(CATEGORIES)))
                i = j
            else:
                i += 1
    return spans


def random_spans(doc: Document, rng: random.Random,
                 p_span: float = 0.3) -> list[PiiSpan]:
    """Non-overlapping spans at arbitrary character positions (may sit
    inside tokens), each within a line and covering at least one token."""
    spans = []
    for li, toks in enumerate(doc.tokens):
        i = 0
        while i < len(toks):
            if rng.random() < p_span:
                j = min(len(toks), i + rng.randint(1, 2))
                start = rng.randint(toks[i].start, toks[i].end - 1)
                end = rng.randint(toks[j - 1].start + 1, toks[j - 1].end)
                if end > start:
                    spans.append(PiiSpan(start, end, rng.choice(CATEGORIES)))
                i = j + 1  # gap of one token avoids post-expansion overlap
            else:
                i += 1
    return spans


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
