#!/usr/bin/env python3
"""k-fold cross-validation study on a synthetic corpus.

Generates a corpus, shuffles the documents into k folds, trains on
k-2 folds + selects on one dev fold per iteration, and reports the
held-out fold scores with mean and sample SD.

Usage: python scripts/crossval_study.py [--docs 500] [--folds 10] [--jobs 8]
"""
import argparse
import json
import tempfile
from pathlib import Path

from deidkit.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--docs", type=int, default=500)
    ap.add_argument("--folds", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="cv-"))
    corpus = out / "corpus"
    cli_main(["synth", "--docs", str(args.docs), "--seed", str(args.seed),
              "--out", str(corpus)])
    cli_main(["crossval", "--corpus", str(corpus),
              "--folds", str(args.folds), "--seed", str(args.seed),
              "--epochs", str(args.epochs), "--jobs", str(args.jobs),
              "--out", str(out / "cv")])

    folds = json.loads((out / "cv" / "folds.json").read_text())
    summary = json.loads((out / "cv" / "summary.json").read_text())
    print(f"\n{'fold':>4}  {'P':>7} {'R':>7} {'F1':>7}  ensemble")
    for row in folds:
        p, r, f1 = row["prf"]
        print(f"{row['fold']:>4}  {p:7.4f} {r:7.4f} {f1:7.4f}  {row['ensemble']}")
    f1 = summary["f1"]
    print(f"\nF1 mean {100 * f1['mean']:.2f} (+/- {100 * f1['sd']:.2f}) "
          f"over {summary['n_folds']} folds -> {out / 'cv'}")


if __name__ == "__main__":
    main()
