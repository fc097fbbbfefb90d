#!/usr/bin/env python3
"""Generate a synthetic grayscale dataset: training textures plus
multi-focus test pairs.

    python3 scripts/make_dataset.py out/ --train-count 32 --pair-count 5

Writes out/train/texture*.pgm and out/pairs/pair*_{a,b}.pgm.  Everything is
seeded, so the same arguments always give byte-identical files.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from wavefuse.synthdata import write_pair_set, write_training_set


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", type=Path, help="dataset root directory")
    parser.add_argument("--train-count", type=int, default=32)
    parser.add_argument("--pair-count", type=int, default=5)
    parser.add_argument("--size", type=int, default=64, help="square image side")
    parser.add_argument("--train-seed", type=int, default=100)
    parser.add_argument("--pair-seed", type=int, default=300)
    parser.add_argument("--sigma", type=float, default=2.0, help="defocus blur strength")
    parser.add_argument("--seam", type=int, default=4, help="focus boundary width in columns")
    args = parser.parse_args()

    train_paths = write_training_set(
        args.out_dir / "train", count=args.train_count, size=args.size, seed=args.train_seed
    )
    pair_paths = write_pair_set(
        args.out_dir / "pairs",
        count=args.pair_count,
        size=args.size,
        seed=args.pair_seed,
        sigma=args.sigma,
        seam=args.seam,
    )
    print(f"wrote {len(train_paths)} training images to {args.out_dir / 'train'}")
    print(f"wrote {len(pair_paths)} pair files to {args.out_dir / 'pairs'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
