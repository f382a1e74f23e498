"""Corpus construction: splits, balanced/imbalanced training sets, k-fold
partitioning, and a deterministic synthetic discharge-summary generator
with exact ground-truth spans.

Everything here is seed-deterministic: the same configuration always
yields byte-identical corpora. Per-document RNGs derive from
(seed, doc index) so documents could be generated in parallel.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .lexicon import STREET_TYPES, load_list
from .textcore import (
    CATEGORIES,
    Document,
    PiiSpan,
    Token,
    repair_bio,
    spans_to_bio,
)


class EmptyCorpus(ValueError):
    pass


class BadK(ValueError):
    pass


class BadConfig(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDoc:
    """A document with its gold PII spans."""

    doc: Document
    spans: tuple[PiiSpan, ...]


@dataclass(frozen=True)
class CorpusEntry:
    """One non-empty text line: raw text, line-local tokens, BIO tags."""

    doc_id: str
    line_index: int
    text: str
    tokens: tuple[Token, ...]
    tags: tuple[str, ...]

    @property
    def has_pii(self) -> bool:
        return any(t != "O" for t in self.tags)


@dataclass(frozen=True)
class LabeledCorpus:
    name: str
    entries: tuple[CorpusEntry, ...]
    provenance: str  # original | balanced | imbalanced | synthetic

    def __post_init__(self):
        keys = {(e.doc_id, e.line_index) for e in self.entries}
        if len(keys) != len(self.entries):
            raise ValueError("duplicate (doc_id, line_index) entries")
        for e in self.entries:
            if tuple(repair_bio(e.tags)) != tuple(e.tags):
                raise ValueError(
                    f"illegal BIO tags in {e.doc_id}:{e.line_index}"
                )

    def pii_line_count(self) -> int:
        return sum(e.has_pii for e in self.entries)


def corpus_from_docs(
    name: str, docs: Iterable[LabeledDoc], provenance: str = "original"
) -> LabeledCorpus:
    """Line corpus over all non-empty lines, tags from the gold spans."""
    entries = []
    for ld in docs:
        seqs = spans_to_bio(ld.doc, ld.spans)
        for li, seq in enumerate(seqs):
            if not seq.tokens:
                continue
            start = ld.doc.lines[li][0]
            local = tuple(
                Token(t.start - start, t.end - start, t.surface)
                for t in seq.tokens
            )
            entries.append(CorpusEntry(
                ld.doc.doc_id, li, ld.doc.line_text(li), local, seq.tags,
            ))
    return LabeledCorpus(name, tuple(entries), provenance)


def build_training_sets(
    corpus: LabeledCorpus, mode: str, seed: int
) -> LabeledCorpus:
    """Balanced: all PII lines plus an equal number of seeded-randomly
    chosen no-PII lines (all of them if fewer exist), original order
    preserved. Imbalanced: the corpus unchanged."""
    if mode not in ("balanced", "imbalanced"):
        raise ValueError(f"unknown mode {mode!r}")
    n_pii = corpus.pii_line_count()
    if n_pii == 0:
        raise EmptyCorpus(f"corpus {corpus.name!r} has no PII lines")
    if mode == "imbalanced":
        return LabeledCorpus(f"{corpus.name}-imbalanced", corpus.entries,
                             "imbalanced")
    neg_idx = [i for i, e in enumerate(corpus.entries) if not e.has_pii]
    rng = random.Random(seed)
    take = set(neg_idx if len(neg_idx) <= n_pii
               else rng.sample(neg_idx, n_pii))
    entries = tuple(
        e for i, e in enumerate(corpus.entries)
        if e.has_pii or i in take
    )
    return LabeledCorpus(f"{corpus.name}-balanced", entries, "balanced")


def kfold_split(doc_ids: Sequence[str], k: int, seed: int) -> list[list[str]]:
    """Seeded shuffle then contiguous partition into k folds whose sizes
    differ by at most one."""
    if k < 2 or len(doc_ids) < k:
        raise BadK(f"cannot split {len(doc_ids)} docs into {k} folds")
    ids = list(doc_ids)
    random.Random(seed).shuffle(ids)
    q, r = divmod(len(ids), k)
    folds = []
    pos = 0
    for i in range(k):
        size = q + (1 if i < r else 0)
        folds.append(ids[pos:pos + size])
        pos += size
    return folds


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    train: tuple[str, ...]
    dev: tuple[str, ...]
    test: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {"seed": self.seed, "train": list(self.train),
                "dev": list(self.dev), "test": list(self.test)}

    @classmethod
    def from_json_dict(cls, d: dict) -> "SplitPlan":
        return cls(d["seed"], tuple(d["train"]), tuple(d["dev"]),
                   tuple(d["test"]))


def split_plan(
    doc_ids: Sequence[str], seed: int, n_train: int, n_dev: int
) -> SplitPlan:
    """Seeded shuffle into train/dev/test; test takes the remainder."""
    if n_train + n_dev >= len(doc_ids):
        raise ValueError("split sizes leave no test documents")
    ids = list(doc_ids)
    random.Random(seed).shuffle(ids)
    return SplitPlan(
        seed=seed,
        train=tuple(ids[:n_train]),
        dev=tuple(ids[n_train:n_train + n_dev]),
        test=tuple(ids[n_train + n_dev:]),
    )


# --- synthetic corpus --------------------------------------------------------

DEFAULT_MIX: dict[str, float] = {
    "PERSON": 0.54, "IDN": 0.155, "PHONE": 0.145, "ADDRESS": 0.114,
    "DOB": 0.045,
}


@dataclass(frozen=True)
class SynthConfig:
    n_docs: int
    seed: int = 0
    pii_line_density: float = 0.114
    category_mix: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_MIX))
    noise_rate: float = 0.01  # cue corruption: "DrLastname", "Pro Lastname"
    min_lines: int = 24
    max_lines: int = 40

    def validated_mix(self) -> dict[str, float]:
        mix = {c: float(self.category_mix.get(c, 0.0)) for c in CATEGORIES}
        if set(self.category_mix) - set(CATEGORIES):
            raise BadConfig(f"unknown categories in mix: "
                            f"{set(self.category_mix) - set(CATEGORIES)}")
        if any(v < 0 for v in mix.values()):
            raise BadConfig("negative mix weight")
        total = sum(mix.values())
        if abs(total - 1.0) > 0.01 or total == 0:
            raise BadConfig(f"category mix sums to {total}, expected 1")
        return {c: v / total for c, v in mix.items()}

    def validate(self) -> None:
        if self.n_docs < 1:
            raise BadConfig("n_docs must be >= 1")
        if not (0.0 < self.pii_line_density <= 1.0):
            raise BadConfig("density must be in (0, 1]")
        if not (0.0 <= self.noise_rate <= 1.0):
            raise BadConfig("noise_rate must be in [0, 1]")
        if not (1 <= self.min_lines <= self.max_lines):
            raise BadConfig("bad line count range")
        self.validated_mix()


class _Line:
    """Accumulates text pieces and the spans over some of them."""

    def __init__(self):
        self.parts: list[str] = []
        self.pos = 0
        self.spans: list[tuple[int, int, str]] = []

    def add(self, text: str) -> "_Line":
        self.parts.append(text)
        self.pos += len(text)
        return self

    def add_pii(self, text: str, category: str) -> "_Line":
        self.spans.append((self.pos, self.pos + len(text), category))
        return self.add(text)

    def render(self) -> tuple[str, list[tuple[int, int, str]]]:
        return "".join(self.parts), self.spans


def _name(rng: random.Random) -> str:
    return (f"{rng.choice(load_list('first_names'))} "
            f"{rng.choice(load_list('last_names'))}")


def _phone(rng: random.Random) -> str:
    kind = rng.randrange(3)
    if kind == 0:
        return f"9{rng.randrange(100, 1000)} {rng.randrange(1000, 10000)}"
    if kind == 1:
        return (f"(0{rng.randrange(2, 9)}) 9{rng.randrange(100, 1000)} "
                f"{rng.randrange(1000, 10000)}")
    return (f"04{rng.randrange(10, 100)} {rng.randrange(100, 1000)} "
            f"{rng.randrange(100, 1000)}")


def _date(rng: random.Random) -> str:
    d, m = rng.randrange(1, 29), rng.randrange(1, 13)
    y = rng.randrange(1930, 2026)
    sep = rng.choice("-/")
    return f"{d:02d}{sep}{m:02d}{sep}{y}"


def _digits(rng: random.Random, n: int) -> str:
    return "".join(str(rng.randrange(10)) for _ in range(n))


def _street_address(rng: random.Random) -> str:
    return (f"{rng.randrange(1, 200)} {rng.choice(load_list('streets'))} "
            f"{rng.choice(STREET_TYPES)}, {rng.choice(load_list('suburbs'))}")


def _doctor_ref(rng: random.Random, line: _Line, noise: bool) -> None:
    """'Dr First Last' with optional cue corruption mirroring real
    spelling-mistake misses; the gold span always covers the name."""
    if noise and rng.random() < 0.5:
        line.add("Pro ").add_pii(rng.choice(load_list("last_names")), "PERSON")
    elif noise:
        line.add_pii(f"Dr{rng.choice(load_list('last_names'))}", "PERSON")
    else:
        line.add("Dr ").add_pii(_name(rng), "PERSON")


def _tpl_patient_header(rng, line, noise):
    line.add("Patient: ")
    if rng.random() < 0.2:
        last = rng.choice(load_list("last_names"))
        first = rng.choice(load_list("first_names"))
        line.add_pii(f"{last}, {first}", "PERSON")
    else:
        line.add_pii(_name(rng), "PERSON")
    line.add(" MRN: ").add_pii(_digits(rng, 6), "IDN")
    line.add(" FIN ").add_pii(_digits(rng, 6), "IDN")


def _tpl_dob_header(rng, line, noise):
    line.add(f"Sex: {rng.choice(('Male', 'Female'))} DOB: ")
    line.add_pii(_date(rng), "DOB")


def _tpl_idn_line(rng, line, noise):
    cue, width = rng.choice((("MRN:", 6), ("FIN:", 6), ("Pager:", 7),
                             ("UR number:", 7)))
    line.add(f"{cue} ").add_pii(_digits(rng, width), "IDN")


def _tpl_person_phone(rng, line, noise):
    line.add("Please contact ")
    _doctor_ref(rng, line, noise)
    line.add(" on Ph: ").add_pii(_phone(rng), "PHONE").add(".")


def _tpl_phone_line(rng, line, noise):
    lead, cue = rng.choice((("", "Ph: "), ("", "Fax: "),
                            ("Contact the ward on Ph: ", ""),
                            ("For results phone Ph: ", "")))
    line.add(lead + cue).add_pii(_phone(rng), "PHONE")


def _tpl_gp_address(rng, line, noise):
    line.add("GP: ")
    _doctor_ref(rng, line, noise)
    line.add(", ").add_pii(_street_address(rng), "ADDRESS").add(".")


def _tpl_address_line(rng, line, noise):
    if rng.random() < 0.7:
        line.add("The patient resides at ")
        line.add_pii(_street_address(rng), "ADDRESS").add(".")
    else:
        line.add("Discharged home to ")
        line.add_pii(rng.choice(load_list("suburbs")), "ADDRESS").add(".")


def _tpl_person_care(rng, line, noise):
    age = rng.randrange(18, 96)
    who = rng.choice(("man", "woman"))
    line.add("Thank you for the care of ").add_pii(_name(rng), "PERSON")
    line.add(f", a {age}-year-old {who}.")


def _tpl_person_plain(rng, line, noise):
    # cue-free mention: only capitalization and the name itself signal PII
    tail = rng.choice((" will follow up in rooms.",
                       " is happy to be contacted about this patient.",
                       " attended the family meeting."))
    line.add_pii(_name(rng), "PERSON").add(tail)


def _tpl_person_dr(rng, line, noise):
    lead, tail = rng.choice((
        ("Known to ", "."),
        ("Reviewed by ", " on the ward round."),
        ("Seen by ", " in clinic."),
        ("Referred by ", " for ongoing management."),
    ))
    line.add(lead)
    _doctor_ref(rng, line, noise)
    line.add(tail)


_TEMPLATES = {
    "patient_header": _tpl_patient_header,
    "dob_header": _tpl_dob_header,
    "idn_line": _tpl_idn_line,
    "person_phone": _tpl_person_phone,
    "phone_line": _tpl_phone_line,
    "gp_address": _tpl_gp_address,
    "address_line": _tpl_address_line,
    "person_care": _tpl_person_care,
    "person_dr": _tpl_person_dr,
    "person_plain": _tpl_person_plain,
}

_FILLERS = (
    "The patient was admitted with chest pain and shortness of breath.",
    "Observations remained stable throughout the admission.",
    "Routine bloods were unremarkable on repeat testing.",
    "A chest x-ray showed no acute changes.",
    "The patient mobilised independently with physiotherapy input.",
    "Medications were reconciled on discharge.",
    "No acute distress was noted on examination.",
    "Electrolytes were within normal limits.",
    "The wound site remained clean and dry.",
    "Follow-up was arranged with the outpatient clinic.",
    "Diet: full ward diet tolerated.",
    "Mobility: independent with a four-wheel walker.",
    "Allergies: nil known.",
    "Presenting complaint: worsening dyspnoea over three days.",
    "An echocardiogram demonstrated preserved systolic function.",
    "Inflammatory markers trended down during the stay.",
    "The care plan was discussed with the family at length.",
    "Oral intake improved prior to discharge.",
    # capitalized medical eponyms and terminology: not PII, deliberately
    # person-shaped to exercise false-positive handling
    "An IVOR LEWIS Esophagectomy was performed without complication.",
    "The Epley manoeuvre resolved the vertigo.",
    "MRSA UTI treated with intravenous antibiotics.",
    "A Hartmann procedure was considered but deferred.",
    "Glasgow Coma Scale remained 15 throughout.",
    "Doppler studies excluded a deep vein thrombosis.",
)

# suburb-shaped words in non-address roles stay untagged: a campus is not
# a patient or GP address
_CAMPUS_FILLERS = (
    "Transferred from the {suburb} campus for ongoing care.",
    "Initially assessed at the {suburb} satellite clinic.",
)

# Non-DOB dates are generated but deliberately left untagged.
_DATED_FILLERS = (
    "Review in outpatient clinic on {date}.",
    "Repeat pathology booked for {date}.",
    "Antibiotics to continue until {date}.",
    "Last colonoscopy was performed on {date}.",
)


def _line_weights(mix: dict[str, float]) -> tuple[list[str], list[float]]:
    """Template sampling weights whose expected entity-category
    distribution equals the configured mix exactly."""
    alpha, beta, gamma = 0.75, 0.5, 0.45
    ph = alpha * mix["IDN"] / 2
    pp = beta * mix["PHONE"]
    ga = gamma * mix["ADDRESS"]
    multi = ph + pp + ga
    if multi > mix["PERSON"] > 0:
        scale = mix["PERSON"] / multi
        ph, pp, ga = ph * scale, pp * scale, ga * scale
    elif mix["PERSON"] == 0:
        ph = pp = ga = 0.0
    singles = mix["PERSON"] - (ph + pp + ga)
    weights = {
        "dob_header": mix["DOB"],
        "patient_header": ph,
        "idn_line": mix["IDN"] - 2 * ph,
        "person_phone": pp,
        "phone_line": mix["PHONE"] - pp,
        "gp_address": ga,
        "address_line": mix["ADDRESS"] - ga,
        "person_care": singles * 0.4,
        "person_dr": singles * 0.4,
        "person_plain": singles * 0.2,
    }
    names = [n for n, w in weights.items() if w > 0]
    return names, [weights[n] for n in names]


def _make_doc(doc_id: str, rng: random.Random, cfg: SynthConfig,
              names: list[str], weights: list[float]) -> LabeledDoc:
    n_lines = rng.randint(cfg.min_lines, cfg.max_lines)
    n_pii = round(cfg.pii_line_density * n_lines)
    pii_at = set(rng.sample(range(n_lines), n_pii))
    lines: list[str] = []
    spans: list[PiiSpan] = []
    pos = 0
    for i in range(n_lines):
        if i in pii_at:
            tpl = rng.choices(names, weights)[0]
            noise = rng.random() < cfg.noise_rate
            builder = _Line()
            _TEMPLATES[tpl](rng, builder, noise)
            text, rel = builder.render()
            spans.extend(
                PiiSpan(pos + s, pos + e, c, "human", "gold")
                for s, e, c in rel
            )
        elif rng.random() < 0.15:
            text = rng.choice(_DATED_FILLERS).format(date=_date(rng))
        elif rng.random() < 0.06:
            text = rng.choice(_CAMPUS_FILLERS).format(
                suburb=rng.choice(load_list("suburbs")))
        else:
            text = rng.choice(_FILLERS)
        lines.append(text)
        pos += len(text) + 1
    return LabeledDoc(
        doc=Document.make(doc_id, "\n".join(lines)),
        spans=tuple(spans),
    )


def generate_synthetic(cfg: SynthConfig) -> list[LabeledDoc]:
    """Deterministic synthetic corpus with exact gold spans.

    Documents mix semi-structured header lines, narrative PII lines, and
    clinical filler prose; realized PII-line fraction tracks the
    configured density and entity categories track the configured mix.
    """
    cfg.validate()
    mix = cfg.validated_mix()
    names, weights = _line_weights(mix)
    return [
        _make_doc(f"synth-{i:04d}",
                  random.Random(cfg.seed * 1_000_003 + i), cfg, names, weights)
        for i in range(cfg.n_docs)
    ]


# --- corpus files ------------------------------------------------------------


def write_corpus(path: str | Path, docs: Iterable[Document]) -> None:
    """One JSON object per line: {doc_id, text}."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"doc_id": d.doc_id, "text": d.text},
                                ensure_ascii=False) + "\n")


def read_corpus(path: str | Path) -> list[Document]:
    docs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            d = json.loads(line)
            docs.append(Document.make(d["doc_id"], d["text"]))
    return docs


def write_gold(path: str | Path, docs: Iterable[LabeledDoc],
               annotator_id: str = "gold") -> None:
    """Gold spans in the annotation file format, one record per doc."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for ld in docs:
            rec = {
                "doc_id": ld.doc.doc_id,
                "annotator_id": annotator_id,
                "revision": 1,
                "status": "confirmed",
                "spans": [
                    {"start": s.start, "end": s.end, "category": s.category,
                     "source": s.source}
                    for s in sorted(ld.spans, key=lambda s: s.start)
                ],
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_gold(path: str | Path) -> dict[str, tuple[PiiSpan, ...]]:
    out: dict[str, tuple[PiiSpan, ...]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        out[d["doc_id"]] = tuple(
            PiiSpan(s["start"], s["end"], s["category"],
                    s.get("source", "human"), d["annotator_id"])
            for s in d["spans"]
        )
    return out
