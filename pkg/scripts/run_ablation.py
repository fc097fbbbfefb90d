#!/usr/bin/env python3
"""End-to-end ablation: does wavelet-domain fusion of autoencoder features
beat plain feature averaging?

    python3 scripts/run_ablation.py work/ --steps 200

Generates a dataset, trains the autoencoder through the CLI, benchmarks every
rule/levels/wavelet combination against the no-transform baseline, and prints
a table of metric means with per-configuration win counts.  Reuses an
existing model file on the second run so the expensive step is paid once.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

from wavefuse.cli import entrypoint
from wavefuse.metrics import METRIC_NAMES
from wavefuse.synthdata import write_pair_set, write_training_set


def run_cli(*argv: str) -> None:
    code = entrypoint(list(argv))
    if code != 0:
        raise SystemExit(f"wavefuse {argv[0]} failed with exit code {code}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("work_dir", type=Path, help="scratch directory for data and results")
    parser.add_argument("--train-count", type=int, default=32)
    parser.add_argument("--pair-count", type=int, default=5)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0, help="training seed")
    parser.add_argument("--sigma", type=float, default=2.0)
    parser.add_argument("--levels", default="1,2")
    parser.add_argument("--wavelets", default="db1,db2")
    parser.add_argument("--rules", default="regional,l1,combined")
    args = parser.parse_args()

    work = args.work_dir
    train_dir = work / "train"
    pair_dir = work / "pairs"
    model = work / "model.wvfs"
    table = work / "ablation.csv"

    write_training_set(train_dir, count=args.train_count, size=args.size, seed=100)
    write_pair_set(pair_dir, count=args.pair_count, size=args.size, seed=300, sigma=args.sigma)

    if model.exists():
        print(f"reusing model {model}")
    else:
        batch = min(8, args.train_count)
        epochs = -(-args.steps * batch // args.train_count)  # enough to reach max-steps
        run_cli(
            "train",
            "--data", str(train_dir),
            "--out", str(model),
            "--batch", str(batch),
            "--epochs", str(epochs),
            "--max-steps", str(args.steps),
            "--size", str(args.size),
            "--seed", str(args.seed),
        )
    run_cli(
        "bench",
        "--pairs", str(pair_dir),
        "--model", str(model),
        "--out", str(table),
        "--levels", args.levels,
        "--wavelets", args.wavelets,
        "--rules", args.rules,
    )

    with open(table, newline="") as fh:
        rows = list(csv.DictReader(fh))
    baseline = next(row for row in rows if row["rule"] == "none")

    def label(row):
        if row["rule"] == "none":
            return "baseline (feature average)"
        return f"{row['rule']:<8} L{row['levels']} {row['wavelet']}"

    width = max(len(label(row)) for row in rows)
    print(f"\nmetric means over {args.pair_count} pairs (wins = metrics >= baseline):")
    print(" " * (width + 2) + " ".join(f"{name:>9}" for name in METRIC_NAMES) + "   wins")
    for row in rows:
        values = [float(row[name]) for name in METRIC_NAMES]
        cells = " ".join(f"{v:9.4f}" for v in values)
        if row is baseline:
            print(f"{label(row):<{width}}  {cells}      -")
        else:
            wins = sum(v >= float(baseline[name]) for v, name in zip(values, METRIC_NAMES))
            print(f"{label(row):<{width}}  {cells}   {wins}/9")
    print(f"\nfull table: {table}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
