"""Base taggers: rule patterns, gazetteer lookup, an averaged structured
perceptron with constrained Viterbi decoding, and replayed external
predictions.

All taggers share one contract: tag(doc) emits one BIO-legal tag per
token, deterministically, without touching the document. Trained models
are immutable; training order is fixed by the seed.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import metrics
from .datasets import LabeledCorpus, LabeledDoc
from .lexicon import STREET_TYPES, load_set
from .textcore import (
    BIO_TAGS,
    BioSequence,
    Document,
    Token,
    bio_to_spans,
    format_bio,
    parse_bio,
    repair_bio,
    spans_to_line_tags,
    PiiSpan,
)


class UntrainedModel(Exception):
    pass


class MissingPrediction(Exception):
    pass


class EmptyTrainingSet(ValueError):
    pass


NEG_INF = float("-inf")
START = "<s>"


def legal_transition(prev: str, tag: str) -> bool:
    """BIO legality: I-X may only follow B-X or I-X (prev START means
    line start)."""
    if not tag.startswith("I-"):
        return True
    cat = tag[2:]
    return prev == f"B-{cat}" or prev == f"I-{cat}"


def viterbi_decode(
    emissions: Sequence[Sequence[float]],
    start: Sequence[float],
    trans: Sequence[Sequence[float]],
) -> tuple[list[int], float]:
    """Exact argmax tag-index sequence of total linear score.

    Score of y = start[y0] + emissions[0][y0]
               + sum_t trans[y_{t-1}][y_t] + emissions[t][y_t].
    -inf entries mark forbidden choices. Ties resolve to the lowest tag
    index, so an all-zero model prefers the first tag.
    """
    n = len(emissions)
    if n == 0:
        return [], 0.0
    k = len(emissions[0])
    score = [start[j] + emissions[0][j] for j in range(k)]
    back: list[list[int]] = []
    for t in range(1, n):
        em = emissions[t]
        nxt = [NEG_INF] * k
        ptr = [0] * k
        for j in range(k):
            e = em[j]
            if e == NEG_INF:
                continue
            best = NEG_INF
            arg = 0
            for i in range(k):
                s = score[i] + trans[i][j]
                if s > best:
                    best = s
                    arg = i
            nxt[j] = best + e
            ptr[j] = arg
        score = nxt
        back.append(ptr)
    best = NEG_INF
    arg = 0
    for j in range(k):
        if score[j] > best:
            best = score[j]
            arg = j
    path = [arg]
    for ptr in reversed(back):
        path.append(ptr[path[-1]])
    path.reverse()
    return path, best


@dataclass(frozen=True)
class LineView:
    """One text line as taggers see it: raw text plus line-local tokens."""

    text: str
    tokens: tuple[Token, ...]

    @classmethod
    def from_doc(cls, doc: Document, line_index: int) -> "LineView":
        start = doc.lines[line_index][0]
        return cls(
            text=doc.line_text(line_index),
            tokens=tuple(Token(t.start - start, t.end - start, t.surface)
                         for t in doc.tokens[line_index]),
        )


class Tagger:
    """Common surface of every base model in a bank."""

    kind = "abstract"

    def __init__(self, tagger_id: str, training_mode: str = "n/a",
                 dev_scores: tuple[float, float, float] | None = None):
        self.tagger_id = tagger_id
        self.training_mode = training_mode
        self.dev_scores = dev_scores

    def predict_line(self, line: LineView) -> list[str]:
        raise NotImplementedError

    def tag(self, doc: Document) -> list[BioSequence]:
        out = []
        for li, toks in enumerate(doc.tokens):
            if not toks:
                out.append(BioSequence((), ()))
                continue
            tags = repair_bio(self.predict_line(LineView.from_doc(doc, li)))
            out.append(BioSequence(toks, tags))
        return out

    def predict_spans(self, doc: Document) -> set[PiiSpan]:
        return bio_to_spans(doc, self.tag(doc), source="machine",
                            annotator_id=self.tagger_id)

    def parameters(self) -> dict:
        return {}

    def to_payload(self) -> dict:
        return {
            "format_version": 1,
            "tagger_id": self.tagger_id,
            "kind": self.kind,
            "training_mode": self.training_mode,
            "dev_scores": list(self.dev_scores) if self.dev_scores else None,
            "parameters": self.parameters(),
        }


def _ranges_to_tags(tokens: tuple[Token, ...],
                    ranges: list[tuple[int, int, str]]) -> list[str]:
    """Non-overlapping (start, end, category) ranges to BIO tags;
    later ranges overlapping earlier ones are dropped."""
    kept: list[tuple[int, int, str]] = []
    for r in sorted(ranges):
        if all(r[0] >= k[1] or r[1] <= k[0] for k in kept):
            kept.append(r)
    spans = [PiiSpan(s, e, c, "machine") for s, e, c in kept
             if any(t.start < e and t.end > s for t in tokens)]
    return list(spans_to_line_tags(tokens, sorted(spans, key=lambda s: s.start)))


_PHONE_NUM = r"(?:\(0\d\)\s*)?\d{4}[ -]\d{4}|04\d{2}[ -]\d{3}[ -]\d{3}"

_IDN_RE = re.compile(
    r"(?:MRN|FIN|UR(?:\s+number)?|Pager)\s*[:#]?\s*(\d{6,8})(?!\d)",
    re.IGNORECASE)
_DOB_RE = re.compile(
    r"(?:DOB|Date\s+of\s+Birth)\s*:?\s*(\d{1,2}[-/]\d{1,2}[-/]\d{2,4})",
    re.IGNORECASE)
_PHONE_CUED_RE = re.compile(
    rf"(?:Ph|Phone|Fax|Tel|Mob(?:ile)?)\.?\s*:?\s*({_PHONE_NUM})",
    re.IGNORECASE)
_PHONE_BARE_RE = re.compile(rf"(?<![\d(])(?:{_PHONE_NUM})(?!\d)")


class PatternTagger(Tagger):
    """Regex rules for the semi-structured mentions: PHONE digit groups
    (optionally cued by Ph:/Fax:), 6-8 digit IDN runs after MRN/FIN/pager
    cues, and dates cued by DOB. Knows nothing about PERSON or ADDRESS."""

    kind = "pattern"

    def __init__(self, tagger_id: str = "pattern", **kw):
        super().__init__(tagger_id, **kw)

    def predict_line(self, line: LineView) -> list[str]:
        ranges: list[tuple[int, int, str]] = []
        for m in _IDN_RE.finditer(line.text):
            ranges.append((m.start(1), m.end(1), "IDN"))
        for m in _DOB_RE.finditer(line.text):
            ranges.append((m.start(1), m.end(1), "DOB"))
        for m in _PHONE_CUED_RE.finditer(line.text):
            ranges.append((m.start(1), m.end(1), "PHONE"))
        for m in _PHONE_BARE_RE.finditer(line.text):
            ranges.append((m.start(), m.end(), "PHONE"))
        return _ranges_to_tags(line.tokens, ranges)


class GazetteerTagger(Tagger):
    """Dictionary lookup: capitalized name runs become PERSON; street
    patterns (number + known street + type, optional suburb) and lone
    suburbs become ADDRESS."""

    kind = "gazetteer"

    def __init__(self, tagger_id: str = "gazetteer", **kw):
        super().__init__(tagger_id, **kw)
        self._names = load_set("first_names") | load_set("last_names")
        self._streets = load_set("streets")
        self._suburbs = load_set("suburbs")
        self._types = {t.lower() for t in STREET_TYPES}

    def predict_line(self, line: LineView) -> list[str]:
        toks = line.tokens
        ranges: list[tuple[int, int, str]] = []
        i = 0
        while i < len(toks) - 2:
            w0, w1, w2 = toks[i], toks[i + 1], toks[i + 2]
            if (w0.surface.isdigit()
                    and w1.surface.lower() in self._streets
                    and w2.surface.lower() in self._types):
                end = w2.end
                if (i + 4 < len(toks) and toks[i + 3].surface == ","
                        and toks[i + 4].surface.lower() in self._suburbs):
                    end = toks[i + 4].end
                ranges.append((w0.start, end, "ADDRESS"))
                i += 3
                continue
            i += 1
        for t in toks:
            if t.surface[0].isupper() and t.surface.lower() in self._suburbs:
                ranges.append((t.start, t.end, "ADDRESS"))
        run: list[Token] = []
        for t in list(toks) + [None]:
            if (t is not None and t.surface[0].isupper()
                    and t.surface.lower() in self._names):
                run.append(t)
                continue
            if run:
                ranges.append((run[0].start, run[-1].end, "PERSON"))
                run = []
        return _ranges_to_tags(line.tokens, ranges)


# --- averaged structured perceptron ------------------------------------------


def _shape(word: str) -> str:
    out = []
    for ch in word:
        c = "X" if ch.isupper() else "x" if ch.islower() else \
            "d" if ch.isdigit() else ch
        if not out or out[-1] != c:
            out.append(c)
    return "".join(out)


_GAZ = None


def _gazetteers():
    global _GAZ
    if _GAZ is None:
        _GAZ = (("first", load_set("first_names")),
                ("last", load_set("last_names")),
                ("street", load_set("streets")),
                ("suburb", load_set("suburbs")))
    return _GAZ


def line_features(tokens: Sequence[Token]) -> list[list[str]]:
    """Per-position emission features: identity, shape, affixes, digit
    signals, gazetteer membership, and a +-2 word window."""
    lowers = [t.surface.lower() for t in tokens]
    feats_all = []
    for i, tok in enumerate(tokens):
        w = tok.surface
        lw = lowers[i]
        feats = [
            "b",
            f"w={lw}",
            f"shape={_shape(w)}",
            f"pre1={lw[:1]}", f"pre2={lw[:2]}", f"pre3={lw[:3]}",
            f"pre4={lw[:4]}",
            f"suf1={lw[-1:]}", f"suf2={lw[-2:]}", f"suf3={lw[-3:]}",
            f"suf4={lw[-4:]}",
        ]
        if w.isdigit():
            feats.append("isdig")
            feats.append(f"dlen={len(w)}")
        elif any(ch.isdigit() for ch in w):
            feats.append("hasdig")
        if w[0].isupper():
            feats.append("cap")
        for gname, gset in _gazetteers():
            if lw in gset:
                feats.append(f"gaz={gname}")
        for off in (-2, -1, 1, 2):
            j = i + off
            word = lowers[j] if 0 <= j < len(tokens) else "<pad>"
            feats.append(f"w{off:+d}={word}")
        for off in (-1, 1):
            j = i + off
            shape = _shape(tokens[j].surface) if 0 <= j < len(tokens) else "<pad>"
            feats.append(f"shape{off:+d}={shape}")
        feats_all.append(feats)
    return feats_all


class _Averaged:
    """Weights with lazily-maintained running sums for averaging."""

    def __init__(self):
        self.w: dict = {}
        self._acc: dict = {}
        self._ts: dict = {}
        self.n = 0

    def add(self, key, delta: float) -> None:
        old = self.w.get(key, 0.0)
        self._acc[key] = self._acc.get(key, 0.0) + (self.n - self._ts.get(key, 0)) * old
        self.w[key] = old + delta
        self._ts[key] = self.n

    def average(self) -> dict:
        out = {}
        for key, val in self.w.items():
            total = self._acc.get(key, 0.0) + (self.n - self._ts.get(key, 0)) * val
            avg = total / self.n if self.n else 0.0
            if avg != 0.0:
                out[key] = avg
        return out


class PerceptronTagger(Tagger):
    """Averaged structured perceptron over explicit string features,
    decoded by exact Viterbi with BIO-legality transition constraints."""

    kind = "perceptron"

    def __init__(self, tagger_id: str, emissions: dict[str, dict[str, float]],
                 transitions: dict[str, dict[str, float]],
                 epochs: int = 0, seed: int = 0, **kw):
        super().__init__(tagger_id, **kw)
        if emissions is None:
            raise UntrainedModel(tagger_id)
        self._em = {t: dict(emissions.get(t, {})) for t in BIO_TAGS}
        self._tr = {p: dict(transitions.get(p, {}))
                    for p in (START,) + BIO_TAGS}
        self.epochs = epochs
        self.seed = seed

    def parameters(self) -> dict:
        return {
            "emissions": self._em,
            "transitions": self._tr,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    def _matrices(self) -> tuple[list[float], list[list[float]]]:
        start = [
            self._tr[START].get(t, 0.0) if legal_transition(START, t)
            else NEG_INF
            for t in BIO_TAGS
        ]
        trans = [
            [
                self._tr[p].get(t, 0.0) if legal_transition(p, t) else NEG_INF
                for t in BIO_TAGS
            ]
            for p in BIO_TAGS
        ]
        return start, trans

    def predict_line(self, line: LineView) -> list[str]:
        return self._decode(line_features(line.tokens))

    def _decode(self, feats: list[list[str]]) -> list[str]:
        if not feats:
            return []
        emissions = [
            [sum(self._em[t].get(f, 0.0) for f in fs) for t in BIO_TAGS]
            for fs in feats
        ]
        start, trans = self._matrices()
        path, _ = viterbi_decode(emissions, start, trans)
        return [BIO_TAGS[j] for j in path]


def train_perceptron(
    train: LabeledCorpus,
    dev: Sequence[LabeledDoc] | None,
    epochs: int = 5,
    seed: int = 0,
    tagger_id: str = "perceptron",
    training_mode: str = "n/a",
) -> PerceptronTagger:
    """Averaged perceptron training: per line, decode with the current
    weights and update on the feature delta between gold and prediction.
    Instance order is shuffled per epoch under the seed; the returned
    model carries weights averaged over every update step."""
    if not train.entries:
        raise EmptyTrainingSet(train.name)
    data = [(line_features(e.tokens), list(e.tags)) for e in train.entries]
    em = _Averaged()
    tr = _Averaged()
    legal_start = [legal_transition(START, t) for t in BIO_TAGS]
    legal = [[legal_transition(p, t) for t in BIO_TAGS] for p in BIO_TAGS]
    rng = random.Random(seed)
    order = list(range(len(data)))
    for _ in range(epochs):
        rng.shuffle(order)
        changed = False
        for idx in order:
            feats, gold = data[idx]
            emissions = [
                [
                    sum(em.w.get((t, f), 0.0) for f in fs)
                    for t in BIO_TAGS
                ]
                for fs in feats
            ]
            start = [
                tr.w.get((START, t), 0.0) if legal_start[j] else NEG_INF
                for j, t in enumerate(BIO_TAGS)
            ]
            trans = [
                [
                    tr.w.get((p, t), 0.0) if legal[i][j] else NEG_INF
                    for j, t in enumerate(BIO_TAGS)
                ]
                for i, p in enumerate(BIO_TAGS)
            ]
            path, _ = viterbi_decode(emissions, start, trans)
            pred = [BIO_TAGS[j] for j in path]
            if pred != gold:
                changed = True
                prev_g = prev_p = START
                for fs, g, p in zip(feats, gold, pred):
                    if g != p:
                        for f in fs:
                            em.add((g, f), 1.0)
                            em.add((p, f), -1.0)
                    if (prev_g, g) != (prev_p, p):
                        tr.add((prev_g, g), 1.0)
                        tr.add((prev_p, p), -1.0)
                    prev_g, prev_p = g, p
            em.n += 1
            tr.n += 1
        if not changed:
            break
    emissions_avg: dict[str, dict[str, float]] = {t: {} for t in BIO_TAGS}
    for (t, f), w in em.average().items():
        emissions_avg[t][f] = w
    transitions_avg: dict[str, dict[str, float]] = {}
    for (p, t), w in tr.average().items():
        transitions_avg.setdefault(p, {})[t] = w
    model = PerceptronTagger(tagger_id, emissions_avg, transitions_avg,
                             epochs=epochs, seed=seed,
                             training_mode=training_mode)
    if dev is not None:
        model.dev_scores = score_on_docs(model, dev)
    return model


# --- imported predictions -----------------------------------------------------


class ImportedTagger(Tagger):
    """Replays externally produced predictions verbatim, aligned to the
    non-empty lines of each document in order."""

    kind = "imported"

    def __init__(self, tagger_id: str,
                 predictions: dict[str, list[list[tuple[str, str]]]], **kw):
        super().__init__(tagger_id, **kw)
        self._preds = predictions

    def parameters(self) -> dict:
        return {
            "docs": [
                {"doc_id": d, "lines": [[[s, t] for s, t in line]
                                        for line in lines]}
                for d, lines in self._preds.items()
            ]
        }

    def predict_line(self, line: LineView) -> list[str]:
        raise MissingPrediction(
            "imported predictions are replayed per document, not per line")

    def tag(self, doc: Document) -> list[BioSequence]:
        if doc.doc_id not in self._preds:
            raise MissingPrediction(doc.doc_id)
        stored = self._preds[doc.doc_id]
        nonempty = [toks for toks in doc.tokens if toks]
        if len(stored) != len(nonempty):
            raise MissingPrediction(
                f"{doc.doc_id}: {len(stored)} stored lines for "
                f"{len(nonempty)} token lines")
        out = []
        cursor = 0
        for toks in doc.tokens:
            if not toks:
                out.append(BioSequence((), ()))
                continue
            line = stored[cursor]
            cursor += 1
            if len(line) != len(toks) or any(
                    s != t.surface for (s, _), t in zip(line, toks)):
                raise MissingPrediction(
                    f"{doc.doc_id}: stored line does not match document tokens")
            out.append(BioSequence(toks, repair_bio(t for _, t in line)))
        return out


def export_predictions(tagger: Tagger, docs: Iterable[Document]) -> str:
    """Tagger output over documents in the BIO file format."""
    return format_bio([(d.doc_id, tagger.tag(d)) for d in docs])


def imported_from_text(text: str, tagger_id: str = "imported") -> ImportedTagger:
    preds = {doc_id: lines for doc_id, lines in parse_bio(text)}
    return ImportedTagger(tagger_id, preds)


def load_imported(path: str | Path, tagger_id: str = "imported") -> ImportedTagger:
    """Build an imported tagger from a BIO-format predictions file."""
    return imported_from_text(Path(path).read_text(encoding="utf-8"), tagger_id)


# --- persistence and the bank -------------------------------------------------


def save_model(tagger: Tagger, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(tagger.to_payload(), ensure_ascii=False), encoding="utf-8")


def load_model(path: str | Path) -> Tagger:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = d["kind"]
    kw = {
        "training_mode": d.get("training_mode", "n/a"),
        "dev_scores": tuple(d["dev_scores"]) if d.get("dev_scores") else None,
    }
    params = d.get("parameters", {})
    if kind == "pattern":
        return PatternTagger(d["tagger_id"], **kw)
    if kind == "gazetteer":
        return GazetteerTagger(d["tagger_id"], **kw)
    if kind == "perceptron":
        return PerceptronTagger(
            d["tagger_id"], params["emissions"], params["transitions"],
            epochs=params.get("epochs", 0), seed=params.get("seed", 0), **kw)
    if kind == "imported":
        preds = {
            doc["doc_id"]: [[(s, t) for s, t in line] for line in doc["lines"]]
            for doc in params["docs"]
        }
        return ImportedTagger(d["tagger_id"], preds, **kw)
    raise ValueError(f"unknown tagger kind {kind!r}")


def score_on_docs(
    tagger: Tagger, docs: Sequence[LabeledDoc]
) -> tuple[float, float, float]:
    """Strict micro (precision, recall, f1) of a tagger on labeled docs."""
    gold = {ld.doc.doc_id: ld.spans for ld in docs}
    pred = {ld.doc.doc_id: tagger.predict_spans(ld.doc) for ld in docs}
    rep = metrics.strict_entity_metrics(gold, pred)
    return (rep.precision, rep.recall, rep.f1)


def build_model_bank(
    train_bal: LabeledCorpus,
    train_imb: LabeledCorpus,
    dev: Sequence[LabeledDoc],
    epochs: int = 5,
    seed: int = 0,
) -> list[Tagger]:
    """Every trainable kind trained on both dataset flavours, static
    taggers included once; all members carry dev scores."""
    bank: list[Tagger] = [
        train_perceptron(train_bal, dev, epochs, seed,
                         tagger_id="perceptron-balanced",
                         training_mode="balanced"),
        train_perceptron(train_imb, dev, epochs, seed,
                         tagger_id="perceptron-imbalanced",
                         training_mode="imbalanced"),
        PatternTagger(),
        GazetteerTagger(),
    ]
    for t in bank:
        if t.dev_scores is None:
            t.dev_scores = score_on_docs(t, dev)
    return bank
