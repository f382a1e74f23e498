"""Command-line entry point: synth -> datasets -> train -> ensemble/select
-> eval/iaa/crossval -> redact, plus the annotation service.

Every stochastic step takes its seed from the configuration, so a fixed
config reproduces byte-identical artifacts; each stage writes a manifest
recording the digests of its inputs. Exit codes: 0 ok, 1 internal
failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import annotation, datasets, ensemble, metrics, redaction, taggers
from .datasets import LabeledDoc, SynthConfig
from .textcore import Document, PiiSpan


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, stage: str, inputs: list[Path],
                    config: dict) -> None:
    manifest = {
        "stage": stage,
        "inputs": {str(p): _sha256(p) for p in sorted(inputs)},
        "config": config,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")


def _need(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageError(stage, f"missing input path: {path}")
    return path


def _load_labeled(corpus_dir: Path, stage: str) -> list[LabeledDoc]:
    docs = datasets.read_corpus(_need(corpus_dir / "corpus.jsonl", stage))
    gold = datasets.read_gold(_need(corpus_dir / "gold.jsonl", stage))
    return [LabeledDoc(d, gold.get(d.doc_id, ())) for d in docs]


def _split_docs(labeled: list[LabeledDoc], plan: datasets.SplitPlan):
    by_id = {ld.doc.doc_id: ld for ld in labeled}
    return ([by_id[i] for i in plan.train],
            [by_id[i] for i in plan.dev],
            [by_id[i] for i in plan.test])


def _parse_mix(text: str | None) -> dict[str, float]:
    if not text:
        return dict(datasets.DEFAULT_MIX)
    mix = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        mix[key.strip()] = float(val)
    return mix


# --- stages -------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_docs=args.docs, seed=args.seed, pii_line_density=args.density,
        category_mix=_parse_mix(args.mix), noise_rate=args.noise_rate,
    )
    try:
        labeled = datasets.generate_synthetic(cfg)
    except datasets.BadConfig as e:
        raise StageError("synth", str(e)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    datasets.write_corpus(out / "corpus.jsonl", [ld.doc for ld in labeled])
    datasets.write_gold(out / "gold.jsonl", labeled)
    _write_manifest(out, "synth", [], {
        "docs": args.docs, "seed": args.seed, "density": args.density,
        "mix": _parse_mix(args.mix), "noise_rate": args.noise_rate,
    })
    n_spans = sum(len(ld.spans) for ld in labeled)
    print(f"synth: {len(labeled)} docs, {n_spans} gold spans -> {out}")
    return 0


def cmd_datasets(args) -> int:
    corpus_dir = Path(args.corpus)
    labeled = _load_labeled(corpus_dir, "datasets")
    plan = datasets.split_plan([ld.doc.doc_id for ld in labeled],
                               args.seed, args.train, args.dev)
    train_docs, dev_docs, test_docs = _split_docs(labeled, plan)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "splits.json", plan.to_json_dict())

    train_corpus = datasets.corpus_from_docs("train", train_docs)
    for mode in ("balanced", "imbalanced"):
        sub = datasets.build_training_sets(train_corpus, mode, args.seed)
        text = _corpus_lines_to_bio(sub)
        (out / f"train_{mode}.bio").write_text(text, encoding="utf-8")
    for name, docs in (("dev", dev_docs), ("test", test_docs)):
        from .textcore import format_bio, spans_to_bio
        text = format_bio([(ld.doc.doc_id, spans_to_bio(ld.doc, ld.spans))
                           for ld in docs])
        (out / f"{name}.bio").write_text(text, encoding="utf-8")
    _write_manifest(out, "datasets",
                    [corpus_dir / "corpus.jsonl", corpus_dir / "gold.jsonl"],
                    {"seed": args.seed, "train": args.train, "dev": args.dev})
    print(f"datasets: train={len(plan.train)} dev={len(plan.dev)} "
          f"test={len(plan.test)} -> {out}")
    return 0


def _corpus_lines_to_bio(corpus: datasets.LabeledCorpus) -> str:
    from .textcore import BioSequence, format_bio
    by_doc: dict[str, list] = {}
    for e in corpus.entries:
        by_doc.setdefault(e.doc_id, []).append(BioSequence(e.tokens, e.tags))
    return format_bio(sorted(by_doc.items()))


def _build_bank(corpus_dir: Path, splits_file: Path, epochs: int, seed: int,
                stage: str):
    labeled = _load_labeled(corpus_dir, stage)
    plan = datasets.SplitPlan.from_json_dict(
        json.loads(_need(splits_file, stage).read_text(encoding="utf-8")))
    train_docs, dev_docs, test_docs = _split_docs(labeled, plan)
    train_corpus = datasets.corpus_from_docs("train", train_docs)
    bal = datasets.build_training_sets(train_corpus, "balanced", seed)
    imb = datasets.build_training_sets(train_corpus, "imbalanced", seed)
    bank = taggers.build_model_bank(bal, imb, dev_docs, epochs, seed)
    return bank, dev_docs, test_docs


def cmd_train(args) -> int:
    bank, _, _ = _build_bank(Path(args.corpus), Path(args.splits),
                             args.epochs, args.seed, "train")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for model in bank:
        name = f"{model.tagger_id}.model.json"
        taggers.save_model(model, out / name)
        files[model.tagger_id] = name
        p, r, f1 = model.dev_scores
        print(f"train: {model.tagger_id:24s} dev P={p:.4f} R={r:.4f} F1={f1:.4f}")
    _write_json(out / "bank.json", {"models": files})
    _write_manifest(out, "train",
                    [Path(args.corpus) / "corpus.jsonl",
                     Path(args.corpus) / "gold.jsonl", Path(args.splits)],
                    {"epochs": args.epochs, "seed": args.seed})
    return 0


def _load_bank(models_dir: Path, stage: str) -> list[taggers.Tagger]:
    bank_file = _need(models_dir / "bank.json", stage)
    files = json.loads(bank_file.read_text(encoding="utf-8"))["models"]
    return [taggers.load_model(models_dir / f) for f in files.values()]


_METHOD_FLAG = {"vote": "majority_vote", "stack-lr": "stack_lr",
                "stack-svm": "stack_svm", "stack-gbt": "stack_gbt"}
_GROUP_FLAG = {"all": "all", "top3-f1": "top3_f1", "top3-recall": "top3_recall"}


def cmd_ensemble(args) -> int:
    models_dir = Path(args.models)
    bank = _load_bank(models_dir, "ensemble")
    labeled = _load_labeled(Path(args.corpus), "ensemble")
    plan = datasets.SplitPlan.from_json_dict(
        json.loads(_need(Path(args.splits), "ensemble").read_text("utf-8")))
    _, dev_docs, _ = _split_docs(labeled, plan)
    method = _METHOD_FLAG[args.method]
    group = ensemble.make_group(bank, _GROUP_FLAG[args.group])
    by_id = {t.tagger_id: t for t in bank}
    ranking = tuple(i for i in
                    [t.tagger_id for t in sorted(
                        bank, key=lambda t: (-t.dev_scores[2], t.tagger_id))]
                    if i in group.members)
    stacker = None
    if method != "majority_vote":
        algo = {"stack_lr": "logistic_regression",
                "stack_svm": "linear_svm",
                "stack_gbt": "gradient_boosted_trees"}[method]
        stacker = ensemble.train_stacker(group, dev_docs, algo, by_id,
                                         seed=args.seed)
    ens = ensemble.EnsembleModel(
        method=method, group=group, ranking=ranking,
        members={m: by_id[m] for m in group.members}, stacker=stacker)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    refs = _model_refs(models_dir, out.parent, group.members)
    ensemble.save_ensemble(ens, out, refs)
    print(f"ensemble: {ens.ensemble_id} -> {out}")
    return 0


def _model_refs(models_dir: Path, ensemble_dir: Path, members) -> dict:
    import os
    files = json.loads((models_dir / "bank.json").read_text("utf-8"))["models"]
    return {
        m: os.path.relpath(models_dir / files[m], ensemble_dir)
        for m in members
    }


def cmd_select(args) -> int:
    models_dir = Path(args.models)
    bank = _load_bank(models_dir, "select")
    labeled = _load_labeled(Path(args.corpus), "select")
    plan = datasets.SplitPlan.from_json_dict(
        json.loads(_need(Path(args.splits), "select").read_text("utf-8")))
    _, dev_docs, test_docs = _split_docs(labeled, plan)
    selection = test_docs if args.select_on == "test" else dev_docs
    best, scoreboard = ensemble.select_best(bank, dev_docs, selection,
                                            seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    refs = _model_refs(models_dir, out, best.group.members)
    ensemble.save_ensemble(best, out / "best.ensemble.json", refs)
    _write_json(out / "scoreboard.json", {
        "selected": best.ensemble_id, "select_on": args.select_on,
        "candidates": scoreboard,
    })
    _write_predictions(out / "test_predictions.jsonl", best, test_docs)
    _write_manifest(out, "select", [Path(args.splits)],
                    {"select_on": args.select_on, "seed": args.seed})
    print(f"select: best={best.ensemble_id} "
          f"(on {args.select_on}) -> {out}")
    return 0


def _write_predictions(path: Path, ens: ensemble.EnsembleModel,
                       docs: list[LabeledDoc]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for ld in docs:
            spans = sorted(ensemble.apply_ensemble(ens, ld.doc),
                           key=lambda s: s.start)
            rec = {
                "doc_id": ld.doc.doc_id,
                "annotator_id": ens.ensemble_id,
                "revision": 1,
                "status": "confirmed",
                "spans": [{"start": s.start, "end": s.end,
                           "category": s.category, "source": "machine"}
                          for s in spans],
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def cmd_eval(args) -> int:
    gold = datasets.read_gold(_need(Path(args.gold), "eval"))
    pred = datasets.read_gold(_need(Path(args.pred), "eval"))
    if args.splits and args.subset:
        plan = datasets.SplitPlan.from_json_dict(
            json.loads(Path(args.splits).read_text("utf-8")))
        keep = set(getattr(plan, args.subset))
        gold = {d: s for d, s in gold.items() if d in keep}
        pred = {d: s for d, s in pred.items() if d in keep}
    if args.mode == "strict":
        report = metrics.strict_entity_metrics(gold, pred)
    else:
        if not args.corpus:
            raise StageError("eval", "binary mode needs --corpus")
        docs = {d.doc_id: d for d in datasets.read_corpus(
            _need(Path(args.corpus) / "corpus.jsonl", "eval"))
            if d.doc_id in gold or d.doc_id in pred}
        report = metrics.binary_token_metrics(gold, pred, docs)
    out = report.to_json_dict()
    if args.taxonomy:
        out["taxonomy"] = metrics.error_taxonomy(gold, pred).to_json_dict()
    text = json.dumps(out, indent=2)
    if args.out:
        _write_json(Path(args.out), out)
    print(text)
    return 0


def cmd_iaa(args) -> int:
    store = annotation.AnnotationStore(_need(Path(args.annotations), "iaa"))
    for doc in datasets.read_corpus(_need(Path(args.corpus) / "corpus.jsonl",
                                          "iaa")):
        store.add_document(doc)
    recs_a = {r.doc_id: r for r in store.records_for(args.a1)}
    recs_b = {r.doc_id: r for r in store.records_for(args.a2)}
    common = sorted(set(recs_a) & set(recs_b))
    if not common:
        raise StageError("iaa", "no commonly annotated documents")
    rep = annotation.iaa_report([store.document(d) for d in common],
                                {d: recs_a[d] for d in common},
                                {d: recs_b[d] for d in common})
    print(json.dumps(rep.to_json_dict(), indent=2))
    if args.out:
        _write_json(Path(args.out), rep.to_json_dict())
    return 0


def _crossval_fold(packed) -> dict:
    fold_i, folds, labeled_json, epochs, seed = packed
    labeled = [
        LabeledDoc(Document.make(d["doc_id"], d["text"]),
                   tuple(PiiSpan(*s) for s in d["spans"]))
        for d in labeled_json
    ]
    by_id = {ld.doc.doc_id: ld for ld in labeled}
    test_ids = set(folds[fold_i])
    dev_ids = set(folds[(fold_i + 1) % len(folds)])
    train_ids = [i for f in folds for i in f
                 if i not in test_ids and i not in dev_ids]
    train_corpus = datasets.corpus_from_docs(
        f"cv{fold_i}", [by_id[i] for i in train_ids])
    bal = datasets.build_training_sets(train_corpus, "balanced", seed)
    imb = datasets.build_training_sets(train_corpus, "imbalanced", seed)
    dev_docs = [by_id[i] for i in sorted(dev_ids)]
    test_docs = [by_id[i] for i in sorted(test_ids)]
    bank = taggers.build_model_bank(bal, imb, dev_docs, epochs, seed)
    best, _ = ensemble.select_best(bank, dev_docs, seed=seed)
    gold = {ld.doc.doc_id: ld.spans for ld in test_docs}
    pred = {ld.doc.doc_id: ensemble.apply_ensemble(best, ld.doc)
            for ld in test_docs}
    rep = metrics.strict_entity_metrics(gold, pred)
    return {"fold": fold_i, "ensemble": best.ensemble_id,
            "report": rep.to_json_dict(),
            "prf": [rep.precision, rep.recall, rep.f1]}


def cmd_crossval(args) -> int:
    labeled = _load_labeled(Path(args.corpus), "crossval")
    try:
        folds = datasets.kfold_split([ld.doc.doc_id for ld in labeled],
                                     args.folds, args.seed)
    except datasets.BadK as e:
        raise StageError("crossval", str(e)) from None
    labeled_json = [
        {"doc_id": ld.doc.doc_id, "text": ld.doc.text,
         "spans": [[s.start, s.end, s.category, s.source, s.annotator_id]
                   for s in ld.spans]}
        for ld in labeled
    ]
    packed = [(i, folds, labeled_json, args.epochs, args.seed)
              for i in range(len(folds))]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_crossval_fold, packed))
    else:
        results = [_crossval_fold(p) for p in packed]
    fold_reports = [
        metrics.MetricsReport.from_counts(
            "strict_entity",
            r["report"]["micro"]["tp"], r["report"]["micro"]["fp"],
            r["report"]["micro"]["fn"])
        for r in results
    ]
    summary = metrics.crossval_report(fold_reports)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "folds.json", results)
    _write_json(out / "summary.json", summary.to_json_dict())
    m, sd = summary.f1
    print(f"crossval: {len(results)} folds, F1 {100 * m:.2f} "
          f"(+/- {100 * sd:.2f})")
    return 0


def cmd_redact(args) -> int:
    ens = ensemble.load_ensemble(_need(Path(args.ensemble), "redact"))
    src = Path(args.input)
    if src.is_dir():
        docs = [Document.make(p.name, p.read_text(encoding="utf-8"))
                for p in sorted(src.glob("*.txt"))]
    else:
        docs = datasets.read_corpus(_need(src, "redact"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        spans = ensemble.apply_ensemble(ens, doc)
        red = redaction.redact(doc, spans, spaced=args.spaced)
        stem = doc.doc_id[:-4] if doc.doc_id.endswith(".txt") else doc.doc_id
        (out / f"{stem}.deid").write_text(red.redacted_text, encoding="utf-8")
        _write_json(out / f"{stem}.spans.json", {
            "doc_id": doc.doc_id,
            "spans": [{"start": s.start, "end": s.end, "category": s.category}
                      for s in red.applied],
        })
    print(f"redact: {len(docs)} documents -> {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    store = annotation.AnnotationStore(args.annotations)
    doc_sets: dict[str, list[str]] = {}
    if args.corpus:
        for doc in datasets.read_corpus(
                _need(Path(args.corpus) / "corpus.jsonl", "serve")):
            store.add_document(doc)
        splits = Path(args.corpus) / "splits.json"
        if splits.exists():
            plan = datasets.SplitPlan.from_json_dict(
                json.loads(splits.read_text("utf-8")))
            doc_sets = {"train": list(plan.train), "dev": list(plan.dev),
                        "test": list(plan.test)}
    ensembles = {}
    if args.models:
        for f in sorted(Path(args.models).glob("*.ensemble.json")):
            ens = ensemble.load_ensemble(f)
            ensembles[ens.ensemble_id] = ens
    app = create_app(store, ensembles, doc_sets, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_pipeline(args) -> int:
    out = Path(args.out)
    ns = argparse.Namespace
    steps = [
        ("synth", cmd_synth, ns(
            docs=args.docs, seed=args.seed, density=args.density,
            mix=None, noise_rate=0.01, out=str(out / "corpus"))),
        ("datasets", cmd_datasets, ns(
            corpus=str(out / "corpus"), seed=args.seed,
            train=args.train, dev=args.dev, out=str(out / "datasets"))),
        ("train", cmd_train, ns(
            corpus=str(out / "corpus"),
            splits=str(out / "datasets" / "splits.json"),
            epochs=args.epochs, seed=args.seed, out=str(out / "models"))),
        ("select", cmd_select, ns(
            models=str(out / "models"), corpus=str(out / "corpus"),
            splits=str(out / "datasets" / "splits.json"),
            select_on=args.select_on, seed=args.seed,
            out=str(out / "ensembles"))),
        ("eval", cmd_eval, ns(
            gold=str(out / "corpus" / "gold.jsonl"),
            pred=str(out / "ensembles" / "test_predictions.jsonl"),
            splits=str(out / "datasets" / "splits.json"), subset="test",
            corpus=str(out / "corpus"), mode="strict", taxonomy=True,
            out=str(out / "reports" / "eval_strict.json"))),
        ("eval", cmd_eval, ns(
            gold=str(out / "corpus" / "gold.jsonl"),
            pred=str(out / "ensembles" / "test_predictions.jsonl"),
            splits=str(out / "datasets" / "splits.json"), subset="test",
            corpus=str(out / "corpus"), mode="binary", taxonomy=False,
            out=str(out / "reports" / "eval_binary.json"))),
        ("redact", cmd_redact, ns(
            ensemble=str(out / "ensembles" / "best.ensemble.json"),
            input=str(out / "corpus" / "corpus.jsonl"),
            out=str(out / "redacted"), spaced=False)),
    ]
    for stage, fn, stage_args in steps:
        code = fn(stage_args)
        if code != 0:
            raise StageError(stage, f"stage returned {code}")
    print(f"pipeline: complete -> {out}")
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deidkit",
        description="De-identification toolkit for clinical narrative text")
    parser.add_argument("--config", help="JSON config file; flags override")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--docs", type=int, default=600)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, default=0.114)
    p.add_argument("--mix", help="e.g. PERSON=0.54,IDN=0.155,...")
    p.add_argument("--noise-rate", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("datasets", help="splits and BIO exports")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", type=int, default=400)
    p.add_argument("--dev", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_datasets)

    p = sub.add_parser("train", help="train the base-model bank")
    p.add_argument("--corpus", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("ensemble", help="assemble a single ensemble")
    p.add_argument("--models", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--method", choices=sorted(_METHOD_FLAG), default="vote")
    p.add_argument("--group", choices=sorted(_GROUP_FLAG), default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ensemble)

    p = sub.add_parser("select", help="pick the best ensemble")
    p.add_argument("--models", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--select-on", choices=("dev", "test"), default="dev")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_select)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--mode", choices=("strict", "binary"), default="strict")
    p.add_argument("--taxonomy", action="store_true")
    p.add_argument("--corpus", help="corpus dir (binary mode)")
    p.add_argument("--splits")
    p.add_argument("--subset", choices=("train", "dev", "test"))
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("iaa", help="inter-annotator agreement")
    p.add_argument("--annotations", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--a1", required=True)
    p.add_argument("--a2", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_iaa)

    p = sub.add_parser("crossval", help="k-fold cross-validation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_crossval)

    p = sub.add_parser("redact", help="replace PII with surrogates")
    p.add_argument("--ensemble", "--model", dest="ensemble", required=True)
    p.add_argument("--in", dest="input", required=True,
                   help="directory of .txt files or a corpus.jsonl")
    p.add_argument("--out", required=True)
    p.add_argument("--spaced", action="store_true",
                   help="use the '<*** CATEGORY ***>' surrogate variant")
    p.set_defaults(fn=cmd_redact)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--annotations", default="annotations.jsonl")
    p.add_argument("--corpus")
    p.add_argument("--models", help="directory of *.ensemble.json files")
    p.add_argument("--static", help="directory of UI assets")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("pipeline", help="synth through redact in one run")
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int, default=600)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, default=0.114)
    p.add_argument("--train", type=int, default=400)
    p.add_argument("--dev", type=int, default=100)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--select-on", choices=("dev", "test"), default="dev")
    p.set_defaults(fn=cmd_pipeline)

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Seed subparser defaults from --config; explicit flags still win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        cfg = json.loads(Path(known.config).read_text(encoding="utf-8"))
        for action in parser._subparsers._group_actions:  # noqa: SLF001
            for sp in action.choices.values():
                sp.set_defaults(**{k.replace("-", "_"): v
                                   for k, v in cfg.items()})
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        args = parser.parse_args(_apply_config(parser, argv))
        return args.fn(args)
    except StageError as e:
        print(f"error {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: missing input path: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as e:  # pragma: no cover - internal failure path
        import traceback
        traceback.print_exc()
        print(f"internal error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
