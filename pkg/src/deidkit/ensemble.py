"""Token-level majority voting and stacking meta-models over base-tagger
groups, plus best-model selection.

Voting is strict plurality with a fallback: when the top count is shared
by two or more tags, the token takes the tag predicted by the
highest-ranked member (ranking = dev F1, descending). Stackers consume
one feature vector per token built by concatenating each member's
predicted-tag one-hot, and are trained on the development set.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import metrics
from .datasets import LabeledDoc
from .taggers import Tagger, load_model
from .textcore import (
    BIO_TAGS,
    Document,
    PiiSpan,
    TAG_INDEX,
    bio_to_spans,
    repair_bio,
    spans_to_bio,
)


class ShapeMismatch(ValueError):
    pass


class EmptyDev(ValueError):
    pass


GROUP_SELECTORS = ("all", "top3_f1", "top3_recall")
METHODS = ("majority_vote", "stack_lr", "stack_svm", "stack_gbt")
_ALGO_OF_METHOD = {"stack_lr": "logistic_regression",
                   "stack_svm": "linear_svm",
                   "stack_gbt": "gradient_boosted_trees"}


def _f1_ranking(bank: Sequence[Tagger]) -> list[str]:
    return [t.tagger_id for t in
            sorted(bank, key=lambda t: (-t.dev_scores[2], t.tagger_id))]


@dataclass(frozen=True)
class ModelGroup:
    """Members always listed by dev F1 descending (ties by tagger_id)."""

    selector: str
    members: tuple[str, ...]


def make_group(bank: Sequence[Tagger], selector: str) -> ModelGroup:
    if selector not in GROUP_SELECTORS:
        raise ValueError(f"unknown selector {selector!r}")
    if any(t.dev_scores is None for t in bank):
        raise ValueError("bank members need dev_scores for grouping")
    by_f1 = _f1_ranking(bank)
    if selector == "all":
        chosen = set(by_f1)
    elif selector == "top3_f1":
        chosen = set(by_f1[:min(3, len(bank))])
    else:
        by_recall = [t.tagger_id for t in
                     sorted(bank, key=lambda t: (-t.dev_scores[1], t.tagger_id))]
        chosen = set(by_recall[:min(3, len(bank))])
    return ModelGroup(selector, tuple(i for i in by_f1 if i in chosen))


def vote(
    predictions: Mapping[str, Sequence[str]], ranking: Sequence[str]
) -> list[str]:
    """Plurality tag per token position; when the maximum count is shared
    by several tags, the top-ranked member's tag is taken. The raw result
    may be BIO-illegal; callers repair before decoding."""
    lengths = {len(v) for v in predictions.values()}
    if len(lengths) > 1:
        raise ShapeMismatch(f"member prediction lengths differ: {lengths}")
    if not predictions:
        return []
    n = lengths.pop()
    best = ranking[0]
    out = []
    for i in range(n):
        counts = Counter(p[i] for p in predictions.values())
        top = counts.most_common()
        if len(top) > 1 and top[0][1] == top[1][1]:
            out.append(predictions[best][i])
        else:
            out.append(top[0][0])
    return out


# --- stacking meta-models -----------------------------------------------------


@dataclass(frozen=True)
class StackerConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    gbt_rounds: int = 50
    gbt_shrinkage: float = 0.1
    gbt_max_depth: int = 3
    include_shape: bool = False  # optionally add the token's word-shape


class StackingModel:
    """Per-token multiclass classifier over member-prediction one-hots.

    feature layout: member j's predicted tag t occupies column
    j * len(BIO_TAGS) + TAG_INDEX[t]; optional word-shape columns follow.
    """

    def __init__(self, algorithm: str, members: tuple[str, ...],
                 payload: dict, shape_vocab: tuple[str, ...] = ()):
        self.algorithm = algorithm
        self.members = members
        self.payload = payload
        self.shape_vocab = shape_vocab

    @property
    def n_features(self) -> int:
        return len(self.members) * len(BIO_TAGS) + len(self.shape_vocab) + 1

    def features(self, member_tags: Sequence[Sequence[str]],
                 shapes: Sequence[str] | None = None) -> np.ndarray:
        """member_tags: per member (in self.members order) the tag per
        token. Returns (n_tokens, n_features) with a trailing bias column."""
        if len(member_tags) != len(self.members):
            raise ShapeMismatch("wrong member count for stacker features")
        n = len(member_tags[0]) if member_tags else 0
        k = len(BIO_TAGS)
        x = np.zeros((n, self.n_features), dtype=np.float64)
        for j, tags in enumerate(member_tags):
            if len(tags) != n:
                raise ShapeMismatch("member prediction lengths differ")
            for i, t in enumerate(tags):
                x[i, j * k + TAG_INDEX[t]] = 1.0
        if self.shape_vocab and shapes is not None:
            base = len(self.members) * k
            idx = {s: i for i, s in enumerate(self.shape_vocab)}
            for i, s in enumerate(shapes):
                if s in idx:
                    x[i, base + idx[s]] = 1.0
        x[:, -1] = 1.0
        return x

    def predict(self, member_tags: Sequence[Sequence[str]],
                shapes: Sequence[str] | None = None) -> list[str]:
        x = self.features(member_tags, shapes)
        if x.shape[0] == 0:
            return []
        if self.algorithm in ("logistic_regression", "linear_svm"):
            w = np.asarray(self.payload["weights"])
            scores = x @ w.T
        else:
            scores = _gbt_scores(self.payload, x)
        return [BIO_TAGS[j] for j in np.argmax(scores, axis=1)]

    def to_json_dict(self) -> dict:
        payload = dict(self.payload)
        if "weights" in payload and isinstance(payload["weights"], np.ndarray):
            payload["weights"] = payload["weights"].tolist()
        return {
            "algorithm": self.algorithm,
            "members": list(self.members),
            "shape_vocab": list(self.shape_vocab),
            "payload": payload,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "StackingModel":
        return cls(d["algorithm"], tuple(d["members"]), d["payload"],
                   tuple(d.get("shape_vocab", ())))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


_BATCH = 256


def _minibatches(n: int, epochs: int, seed: int):
    rng = np.random.default_rng(seed)
    idx = np.arange(n)
    for _ in range(epochs):
        rng.shuffle(idx)
        for lo in range(0, n, _BATCH):
            yield idx[lo:lo + _BATCH]


def _fit_lr(x: np.ndarray, y: np.ndarray, cfg: StackerConfig,
            seed: int) -> np.ndarray:
    """Multinomial softmax regression by seeded minibatch gradient
    descent."""
    n, d = x.shape
    k = len(BIO_TAGS)
    w = np.zeros((k, d))
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0
    for batch in _minibatches(n, cfg.epochs, seed):
        xb = x[batch]
        p = _softmax(xb @ w.T)
        grad = (p - onehot[batch]).T @ xb / len(batch) + cfg.l2 * w
        w -= cfg.learning_rate * grad
    return w


def _fit_svm(x: np.ndarray, y: np.ndarray, cfg: StackerConfig,
             seed: int) -> np.ndarray:
    """One-vs-rest linear SVM by seeded minibatch subgradient descent on
    the hinge loss; prediction is argmax of the per-class scores."""
    n, d = x.shape
    k = len(BIO_TAGS)
    w = np.zeros((k, d))
    ymat = np.full((n, k), -1.0)
    ymat[np.arange(n), y] = 1.0
    for batch in _minibatches(n, cfg.epochs, seed):
        xb = x[batch]
        yb = ymat[batch]
        viol = (yb * (xb @ w.T) < 1.0).astype(np.float64)
        grad = -(yb * viol).T @ xb / len(batch) + cfg.l2 * w
        w -= cfg.learning_rate * grad
    return w


def _fit_tree(x: np.ndarray, r: np.ndarray, h: np.ndarray,
              idx: np.ndarray, depth: int, step: np.ndarray) -> dict:
    """Regression tree on binary features; leaf values are Newton steps
    sum(r)/sum(h), also written into `step` for the training rows.
    Split ties resolve to the lowest feature index."""
    total_r = float(r[idx].sum())
    total_h = float(h[idx].sum())
    value = total_r / total_h if total_h > 1e-12 else 0.0
    if depth == 0 or len(idx) < 2:
        step[idx] = value
        return {"leaf": value}
    n_all = x.shape[0]
    r_node = np.zeros(n_all)
    r_node[idx] = r[idx]
    m_node = np.zeros(n_all)
    m_node[idx] = 1.0
    sum_r1 = x.T @ r_node      # per feature: residual sum where x == 1
    cnt1 = x.T @ m_node
    n = len(idx)
    # variance-reduction gain of splitting on each binary feature
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(
            (cnt1 > 0) & (cnt1 < n),
            sum_r1 ** 2 / np.maximum(cnt1, 1)
            + (total_r - sum_r1) ** 2 / np.maximum(n - cnt1, 1),
            -np.inf,
        )
    j = int(np.argmax(gain))
    if not np.isfinite(gain[j]):
        step[idx] = value
        return {"leaf": value}
    mask = x[idx, j] == 1.0
    right = idx[mask]
    left = idx[~mask]
    if len(left) == 0 or len(right) == 0:
        step[idx] = value
        return {"leaf": value}
    return {
        "feature": j,
        "left": _fit_tree(x, r, h, left, depth - 1, step),
        "right": _fit_tree(x, r, h, right, depth - 1, step),
    }


def _tree_values(tree: dict, x: np.ndarray) -> np.ndarray:
    if "leaf" in tree:
        return np.full(x.shape[0], tree["leaf"])
    out = np.empty(x.shape[0])
    mask = x[:, tree["feature"]] == 1.0
    out[mask] = _tree_values(tree["right"], x[mask])
    out[~mask] = _tree_values(tree["left"], x[~mask])
    return out


def _fit_gbt(x: np.ndarray, y: np.ndarray, cfg: StackerConfig) -> dict:
    """One-vs-rest additive shallow regression trees on log-odds."""
    n = x.shape[0]
    k = len(BIO_TAGS)
    classes = []
    for c in range(k):
        yc = (y == c).astype(np.float64)
        prior = np.clip(yc.mean(), 1e-6, 1 - 1e-6)
        f = np.full(n, np.log(prior / (1 - prior)))
        base = float(f[0])
        trees = []
        for _ in range(cfg.gbt_rounds):
            p = 1.0 / (1.0 + np.exp(-np.clip(f, -35.0, 35.0)))
            residual = yc - p
            hess = p * (1 - p)
            step = np.zeros(n)
            tree = _fit_tree(x, residual, hess, np.arange(n),
                             cfg.gbt_max_depth, step)
            f = f + cfg.gbt_shrinkage * step
            trees.append(tree)
        classes.append({"base": base, "trees": trees})
    return {"classes": classes, "shrinkage": cfg.gbt_shrinkage}


def _gbt_scores(payload: dict, x: np.ndarray) -> np.ndarray:
    shrink = payload["shrinkage"]
    cols = []
    for cls in payload["classes"]:
        f = np.full(x.shape[0], cls["base"])
        for tree in cls["trees"]:
            f = f + shrink * _tree_values(tree, x)
        cols.append(f)
    return np.stack(cols, axis=1)


def _shape_of(surface: str) -> str:
    from .taggers import _shape
    return _shape(surface)


def _dev_rows(
    group: ModelGroup,
    dev: Sequence[LabeledDoc],
    table: Mapping[str, Mapping[str, list[list[str]]]],
) -> tuple[list[list[str]], list[int], list[str]]:
    """Flattened per-token member predictions, gold targets, and shapes
    over the dev docs."""
    member_tags: list[list[str]] = [[] for _ in group.members]
    targets: list[int] = []
    shapes: list[str] = []
    for ld in dev:
        gold_seqs = spans_to_bio(ld.doc, ld.spans)
        per_member = table[ld.doc.doc_id]
        for li, seq in enumerate(gold_seqs):
            for ti, tok in enumerate(seq.tokens):
                targets.append(TAG_INDEX[seq.tags[ti]])
                shapes.append(_shape_of(tok.surface))
                for j, mid in enumerate(group.members):
                    member_tags[j].append(per_member[mid][li][ti])
    return member_tags, targets, shapes


def train_stacker(
    group: ModelGroup,
    dev: Sequence[LabeledDoc],
    algorithm: str,
    bank: Mapping[str, Tagger],
    config: StackerConfig = StackerConfig(),
    seed: int = 0,
    table: Mapping[str, Mapping[str, list[list[str]]]] | None = None,
) -> StackingModel:
    """Fit a meta-model on member predictions over the development set.

    Training is deterministic: full-batch updates, zero initialization;
    the seed is recorded but nothing here samples.
    """
    if table is None:
        table = predict_table([bank[m] for m in group.members],
                              [ld.doc for ld in dev])
    member_tags, targets, shapes = _dev_rows(group, dev, table)
    if not targets:
        raise EmptyDev("development set has no tokens")
    shape_vocab = tuple(sorted(set(shapes))) if config.include_shape else ()
    model = StackingModel(algorithm, group.members, {}, shape_vocab)
    x = model.features(member_tags, shapes if config.include_shape else None)
    y = np.asarray(targets)
    if algorithm == "logistic_regression":
        model.payload = {"weights": _fit_lr(x, y, config, seed)}
    elif algorithm == "linear_svm":
        model.payload = {"weights": _fit_svm(x, y, config, seed)}
    elif algorithm == "gradient_boosted_trees":
        model.payload = _fit_gbt(x, y, config)
    else:
        raise ValueError(f"unknown stacking algorithm {algorithm!r}")
    return model


# --- ensembles ----------------------------------------------------------------


@dataclass
class EnsembleModel:
    method: str  # majority_vote | stack_lr | stack_svm | stack_gbt
    group: ModelGroup
    ranking: tuple[str, ...]  # tagger_ids by dev F1, best first
    members: dict[str, Tagger] = field(repr=False)
    stacker: StackingModel | None = None
    ensemble_id: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if (self.method != "majority_vote") != (self.stacker is not None):
            raise ValueError("stacking methods carry a stacker; voting none")
        if not self.ensemble_id:
            self.ensemble_id = f"{self.method}-{self.group.selector}"


def predict_table(
    taggers: Sequence[Tagger], docs: Iterable[Document]
) -> dict[str, dict[str, list[list[str]]]]:
    """Per-document, per-member tag lists (one list per line). Member
    predictions are independent, so this is the natural parallel unit."""
    return {
        doc.doc_id: {
            t.tagger_id: [list(seq.tags) for seq in t.tag(doc)]
            for t in taggers
        }
        for doc in docs
    }


def combine_tags(
    ens: EnsembleModel,
    doc: Document,
    per_member: Mapping[str, list[list[str]]],
) -> list[list[str]]:
    """Member predictions for one doc combined per the ensemble method,
    repaired line by line."""
    if ens.method == "majority_vote":
        return [
            list(repair_bio(vote(
                {m: per_member[m][li] for m in ens.group.members},
                ens.ranking)))
            for li in range(len(doc.tokens))
        ]
    # stacking: one batched prediction over the whole document
    member_tags = [
        [t for line in per_member[m] for t in line]
        for m in ens.stacker.members
    ]
    shapes = None
    if ens.stacker.shape_vocab:
        shapes = [_shape_of(t.surface) for line in doc.tokens for t in line]
    flat = ens.stacker.predict(member_tags, shapes)
    out = []
    pos = 0
    for toks in doc.tokens:
        out.append(list(repair_bio(flat[pos:pos + len(toks)])))
        pos += len(toks)
    return out


def apply_ensemble(ens: EnsembleModel, doc: Document) -> set[PiiSpan]:
    """Gather member predictions, combine, repair, decode to spans."""
    per_member = {
        m: [list(seq.tags) for seq in ens.members[m].tag(doc)]
        for m in ens.group.members
    }
    tags = combine_tags(ens, doc, per_member)
    return bio_to_spans(doc, tags, source="machine",
                        annotator_id=ens.ensemble_id)


def _candidate_f1(
    ens: EnsembleModel,
    docs: Sequence[LabeledDoc],
    table: Mapping[str, Mapping[str, list[list[str]]]],
) -> float:
    gold = {ld.doc.doc_id: ld.spans for ld in docs}
    pred = {
        ld.doc.doc_id: bio_to_spans(
            ld.doc, combine_tags(ens, ld.doc, table[ld.doc.doc_id]),
            source="machine", annotator_id=ens.ensemble_id)
        for ld in docs
    }
    return metrics.strict_entity_metrics(gold, pred).f1


def select_best(
    bank: Sequence[Tagger],
    dev: Sequence[LabeledDoc],
    selection: Sequence[LabeledDoc] | None = None,
    config: StackerConfig = StackerConfig(),
    seed: int = 0,
) -> tuple[EnsembleModel, list[dict]]:
    """Evaluate every method x group combination plus each base model on
    the selection set (default: dev) by strict micro-F1; return the
    argmax and the scoreboard. Ties resolve by candidate order: methods
    as listed in METHODS, groups as in GROUP_SELECTORS, then base models
    in bank order."""
    if not bank:
        raise ValueError("empty model bank")
    selection = dev if selection is None else selection
    by_id = {t.tagger_id: t for t in bank}
    ranking = tuple(_f1_ranking(bank))
    all_docs = {ld.doc.doc_id: ld.doc for ld in list(dev) + list(selection)}
    table = predict_table(bank, all_docs.values())

    candidates: list[EnsembleModel] = []
    for method in METHODS:
        for selector in GROUP_SELECTORS:
            group = make_group(bank, selector)
            group_ranking = tuple(i for i in ranking if i in group.members)
            stacker = None
            if method != "majority_vote":
                stacker = train_stacker(group, dev, _ALGO_OF_METHOD[method],
                                        by_id, config, seed, table)
            candidates.append(EnsembleModel(
                method=method, group=group, ranking=group_ranking,
                members={m: by_id[m] for m in group.members},
                stacker=stacker))
    for t in bank:
        candidates.append(EnsembleModel(
            method="majority_vote",
            group=ModelGroup("all", (t.tagger_id,)),
            ranking=(t.tagger_id,),
            members={t.tagger_id: t},
            ensemble_id=f"base-{t.tagger_id}"))

    scoreboard = []
    best = None
    best_f1 = -1.0
    for ens in candidates:
        f1 = _candidate_f1(ens, selection, table)
        scoreboard.append({"ensemble_id": ens.ensemble_id,
                           "method": ens.method,
                           "group": ens.group.selector,
                           "members": list(ens.group.members),
                           "f1": f1})
        if f1 > best_f1:
            best = ens
            best_f1 = f1
    return best, scoreboard


# --- persistence --------------------------------------------------------------


def save_ensemble(ens: EnsembleModel, path: str | Path,
                  model_files: Mapping[str, str]) -> None:
    """Serialize an ensemble; members are referenced by model file path
    (relative paths resolve against the ensemble file's directory)."""
    d = {
        "format_version": 1,
        "ensemble_id": ens.ensemble_id,
        "method": ens.method,
        "group": {"selector": ens.group.selector,
                  "members": list(ens.group.members)},
        "ranking": list(ens.ranking),
        "members": [{"tagger_id": m, "file": model_files[m]}
                    for m in ens.group.members],
        "stacker": ens.stacker.to_json_dict() if ens.stacker else None,
    }
    Path(path).write_text(json.dumps(d, ensure_ascii=False),
                          encoding="utf-8")


def load_ensemble(path: str | Path) -> EnsembleModel:
    path = Path(path)
    d = json.loads(path.read_text(encoding="utf-8"))
    members = {}
    for ref in d["members"]:
        f = Path(ref["file"])
        if not f.is_absolute():
            f = path.parent / f
        members[ref["tagger_id"]] = load_model(f)
    return EnsembleModel(
        method=d["method"],
        group=ModelGroup(d["group"]["selector"], tuple(d["group"]["members"])),
        ranking=tuple(d["ranking"]),
        members=members,
        stacker=StackingModel.from_json_dict(d["stacker"])
        if d.get("stacker") else None,
        ensemble_id=d.get("ensemble_id", ""),
    )
