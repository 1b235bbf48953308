"""Command-line entry point: ``sqa {bench,flops,check,train,classify}``.

Thread count for the BLAS pool comes from ``--threads``, the bench spec, or
the ``SQA_NUM_THREADS`` environment variable (which wins).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from .bench import BenchSpec, default_spec, emit_csv, run_bench, run_metadata, speedup_table
from .check import run_check
from .config import ConfigError, classify_variant, load_config
from .cost import attention_flops
from .train import TrainingDiverged, toy_train


def _cmd_bench(args) -> int:
    if args.spec:
        with open(args.spec) as f:
            spec = BenchSpec.from_json(f.read())
    else:
        spec = default_spec()
    if args.threads:
        spec.threads = args.threads

    def progress(r):
        t = "skipped" if r.median_seconds is None else f"{r.median_seconds:.4f}s"
        print(f"  {r.variant:>10} N={r.N:<7} {t}", file=sys.stderr, flush=True)

    records = run_bench(spec, progress=progress)
    text = emit_csv(records, run_metadata(spec))
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    baseline = spec.baseline_name
    if baseline is not None:
        try:
            print(speedup_table(records, baseline).format(), file=sys.stderr if not args.out else sys.stdout)
        except ValueError as e:
            print(f"no speedup table: {e}", file=sys.stderr)
    return 0


def _cmd_flops(args) -> int:
    cfg = load_config(args.config)
    print(json.dumps(asdict(attention_flops(cfg, args.n, mode=args.mode)), indent=2))
    return 0


def _cmd_check(args) -> int:
    results = run_check(args.suite)
    failed = [r for r in results if not r.passed]
    for r in results:
        if args.verbose or not r.passed:
            print(r.line())
    print(f"{len(results) - len(failed)}/{len(results)} passed")
    return 1 if failed else 0


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    try:
        losses = toy_train(cfg, args.steps, args.lr, args.seed, n=args.n)
    except TrainingDiverged as e:
        print(f"diverged: {e}", file=sys.stderr)
        return 1
    print(json.dumps({"initial": losses[0], "final": losses[-1], "losses": losses}))
    return 0


def _cmd_classify(args) -> int:
    print(classify_variant(load_config(args.config)).value)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sqa", description="Sparse-query attention toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="time forward passes across variants and sequence lengths")
    b.add_argument("--spec", help="bench spec JSON (default: desk sweep)")
    b.add_argument("--out", help="CSV output path (default: stdout)")
    b.add_argument("--threads", type=int, help="BLAS thread count")
    b.set_defaults(fn=_cmd_bench)

    f = sub.add_parser("flops", help="print the FLOP report for a config")
    f.add_argument("--config", required=True)
    f.add_argument("--n", type=int, required=True)
    f.add_argument("--mode", choices=("dense", "effective"), default="dense")
    f.set_defaults(fn=_cmd_flops)

    c = sub.add_parser("check", help="run self-check suites")
    c.add_argument("--suite", choices=("equivalence", "gradients", "flops", "all"), default="all")
    c.add_argument("-v", "--verbose", action="store_true")
    c.set_defaults(fn=_cmd_check)

    t = sub.add_parser("train", help="toy regression fit of one layer")
    t.add_argument("--config", required=True)
    t.add_argument("--steps", type=int, required=True)
    t.add_argument("--lr", type=float, required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--n", type=int, default=8, help="sequence length")
    t.set_defaults(fn=_cmd_train)

    k = sub.add_parser("classify", help="print the variant tag of a config")
    k.add_argument("--config", required=True)
    k.set_defaults(fn=_cmd_classify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
