"""Command-line front end: train / fuse / eval / bench.

Exit codes: 0 success, 1 usage error (bad flags), 2 runtime error (bad
files, dimension mismatches, training aborts). The WAVEFUSE_THREADS
environment variable caps the worker count for batch evaluation and bench
sweeps; results are always emitted in deterministic order regardless.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .errors import DataError, DimensionError, FormatError, ModelError, TrainingError
from .fusionrules import RULES, FusionRuleConfig
from .imageio import load_grayscale, resize_bilinear, save_grayscale
from .metrics import CSV_HEADER, METRIC_NAMES, evaluate_all, report_to_json, reports_to_csv
from .network import (
    TrainConfig,
    fuse_images,
    fuse_images_no_dwt,
    load_model,
    save_model,
    train,
)
from .wavelet import BASES

__all__ = ["entrypoint", "build_parser"]

RULE_FLAGS = ("regional", "l1", "combined")  # CLI spelling; "l1" -> "l1norm"

_RUNTIME_ERRORS = (
    DataError,
    DimensionError,
    FormatError,
    ModelError,
    TrainingError,
    ValueError,
    OSError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; the CLI contract wants 1."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _worker_count() -> int:
    raw = os.environ.get("WAVEFUSE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    items = list(items)
    workers = min(_worker_count(), max(len(items), 1))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _rule_config(args) -> FusionRuleConfig:
    rule = "l1norm" if args.rule == "l1" else args.rule
    return FusionRuleConfig(
        rule=rule,
        levels=args.levels,
        basis=args.wavelet,
        window=args.window,
        match_threshold=args.match_threshold,
        block_radius=args.block_radius,
    )


def _write_text(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    config = TrainConfig(
        dataset_dir=args.data,
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        lambda_ssim=args.lambda_ssim,
        seed=args.seed,
        image_size=args.size,
        max_steps=args.max_steps,
    )
    weights, history = train(config)
    out = Path(args.out)
    save_model(weights, out)
    loss_path = out.with_suffix(".loss.csv")
    with open(loss_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "total", "pixel", "ssim_loss"])
        for i, h in enumerate(history):
            writer.writerow([i, repr(h.total), repr(h.pixel), repr(h.ssim_loss)])
    print(f"wrote {out} and {loss_path} ({len(history)} epochs)")
    return 0


def cmd_fuse(args) -> int:
    weights = load_model(args.model)
    img_a = load_grayscale(args.image_a)
    img_b = load_grayscale(args.image_b)
    if img_a.pixels.shape != img_b.pixels.shape:
        h = min(img_a.height, img_b.height)
        w = min(img_a.width, img_b.width)
        print(
            f"warning: input dims differ ({img_a.height}x{img_a.width} vs "
            f"{img_b.height}x{img_b.width}); resizing both to {h}x{w}",
            file=sys.stderr,
        )
        img_a = resize_bilinear(img_a, w, h)
        img_b = resize_bilinear(img_b, w, h)
    fused = fuse_images(img_a, img_b, weights, _rule_config(args))
    save_grayscale(fused, args.out)
    print(f"wrote {args.out}")
    return 0


def _eval_triple(paths):
    path_a, path_b, path_f = paths
    img_a = load_grayscale(path_a)
    img_b = load_grayscale(path_b)
    fused = load_grayscale(path_f)
    return evaluate_all(
        img_a, img_b, fused, source_a=str(path_a), source_b=str(path_b), fused_id=str(path_f)
    )


def _eval_batch(args) -> int:
    with open(args.batch, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]

    def attempt(numbered):
        lineno, row = numbered
        cells = [c.strip() for c in row]
        if len(cells) != 3:
            return lineno, None, f"expected 3 columns, got {len(cells)}"
        try:
            return lineno, _eval_triple(cells), None
        except _RUNTIME_ERRORS as exc:
            return lineno, None, str(exc)

    results = _map_ordered(attempt, enumerate(rows, start=1))
    reports = []
    for lineno, report, problem in results:
        if report is None:
            print(f"warning: manifest row {lineno} skipped: {problem}", file=sys.stderr)
        else:
            reports.append(report)
    if not reports:
        print("error: no manifest row could be evaluated", file=sys.stderr)
        return 2
    _write_text(args.out, reports_to_csv(reports))
    return 0


def cmd_eval(args) -> int:
    if args.batch is not None:
        return _eval_batch(args)
    if not (args.image_a and args.image_b and args.fused):
        raise _UsageError("eval: -a, -b and --fused are required (or use --batch)")
    report = _eval_triple((args.image_a, args.image_b, args.fused))
    text = report_to_json(report) if args.format == "json" else reports_to_csv([report])
    _write_text(args.out, text)
    return 0


def _find_pairs(directory) -> list:
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"pair directory not found: {root}")
    pairs = []
    for path_a in sorted(root.iterdir()):
        stem = path_a.stem
        if not stem.endswith("_a") or path_a.suffix.lower() not in (".pgm", ".png"):
            continue
        for suffix in (path_a.suffix, ".pgm", ".png"):
            path_b = path_a.with_name(stem[:-2] + "_b" + suffix)
            if path_b.exists():
                pairs.append((path_a, path_b))
                break
    if not pairs:
        raise DataError(f"no *_a/*_b image pairs found in {root}")
    return pairs


def cmd_bench(args) -> int:
    weights = load_model(args.model)
    pairs = _find_pairs(args.pairs)
    images = [(load_grayscale(a), load_grayscale(b)) for a, b in pairs]

    try:
        levels = [int(v) for v in args.levels.split(",") if v.strip()]
    except ValueError:
        raise _UsageError(f"bench: --levels must be a comma list of integers, got '{args.levels}'")
    wavelets = [v.strip() for v in args.wavelets.split(",") if v.strip()]
    rules = [v.strip() for v in args.rules.split(",") if v.strip()]
    for rule in rules:
        if rule not in RULE_FLAGS:
            raise _UsageError(f"bench: unknown rule '{rule}'; choose from {RULE_FLAGS}")
    for basis in wavelets:
        if basis not in BASES:
            raise _UsageError(f"bench: unknown wavelet '{basis}'; choose from {tuple(BASES)}")

    configs = [("none", "", "")]
    for rule in rules:
        for lv in levels:
            for basis in wavelets:
                configs.append((rule, lv, basis))

    def run_config(config):
        rule, lv, basis = config
        totals = [0.0] * len(METRIC_NAMES)
        for img_a, img_b in images:
            if rule == "none":
                fused = fuse_images_no_dwt(img_a, img_b, weights)
            else:
                rcfg = FusionRuleConfig(
                    rule="l1norm" if rule == "l1" else rule, levels=lv, basis=basis
                )
                fused = fuse_images(img_a, img_b, weights, rcfg)
            report = evaluate_all(img_a, img_b, fused)
            for i, name in enumerate(METRIC_NAMES):
                totals[i] += report.values[name]
        return [t / len(images) for t in totals]

    rows = _map_ordered(run_config, configs)
    lines = [",".join(("rule", "levels", "wavelet") + METRIC_NAMES)]
    for (rule, lv, basis), means in zip(configs, rows):
        lines.append(",".join([rule, str(lv), basis] + [repr(v) for v in means]))
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_rule_flags(parser) -> None:
    parser.add_argument("--rule", choices=RULE_FLAGS, default="combined",
                        help="fusion rule (default: combined)")
    parser.add_argument("--levels", type=int, default=2, help="DWT levels (default: 2)")
    parser.add_argument("--wavelet", choices=tuple(BASES), default="db1",
                        help="wavelet basis (default: db1)")
    parser.add_argument("--window", type=int, default=3,
                        help="regional-energy window size (default: 3)")
    parser.add_argument("--match-threshold", type=float, default=0.6,
                        help="select-vs-average threshold (default: 0.6)")
    parser.add_argument("--block-radius", type=int, default=1,
                        help="l1 activity block radius (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wavefuse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p_train = sub.add_parser("train", help="train the autoencoder on a directory of images")
    p_train.add_argument("--data", required=True, help="directory of training images (pgm/png)")
    p_train.add_argument("--out", required=True, help="output model path (.wvfs)")
    p_train.add_argument("--epochs", type=int, default=100)
    p_train.add_argument("--batch", type=int, default=16)
    p_train.add_argument("--lr", type=float, default=1e-4)
    p_train.add_argument("--lambda", dest="lambda_ssim", type=float, default=1000.0,
                         help="SSIM loss weight (default: 1000)")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--size", type=int, default=256, help="training resolution")
    p_train.add_argument("--max-steps", type=int, default=None,
                         help="stop after this many optimizer steps")
    p_train.set_defaults(func=cmd_train)

    p_fuse = sub.add_parser("fuse", help="fuse two images with a trained model")
    p_fuse.add_argument("--model", required=True)
    p_fuse.add_argument("-a", dest="image_a", required=True, help="first source image")
    p_fuse.add_argument("-b", dest="image_b", required=True, help="second source image")
    p_fuse.add_argument("-o", dest="out", required=True, help="output image path")
    _add_rule_flags(p_fuse)
    p_fuse.set_defaults(func=cmd_fuse)

    p_eval = sub.add_parser("eval", help="compute the nine fusion metrics")
    p_eval.add_argument("-a", dest="image_a", help="first source image")
    p_eval.add_argument("-b", dest="image_b", help="second source image")
    p_eval.add_argument("--fused", help="fused image")
    p_eval.add_argument("--format", choices=("csv", "json"), default="csv")
    p_eval.add_argument("--batch", help="manifest CSV of a,b,fused paths")
    p_eval.add_argument("--out", help="write report here instead of stdout")
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="sweep fusion configurations over image pairs")
    p_bench.add_argument("--pairs", required=True, help="directory of *_a/*_b image pairs")
    p_bench.add_argument("--model", required=True)
    p_bench.add_argument("--levels", default="1,2", help="comma list of DWT levels")
    p_bench.add_argument("--wavelets", default="db1", help="comma list of bases")
    p_bench.add_argument("--rules", default="regional,l1,combined", help="comma list of rules")
    p_bench.add_argument("--out", help="write CSV here instead of stdout")
    p_bench.set_defaults(func=cmd_bench)

    return parser


def entrypoint(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(entrypoint())
