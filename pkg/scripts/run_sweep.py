"""Run a timing sweep and write the raw CSV plus the speedup table.

    python3 scripts/run_sweep.py --out-dir results/
    python3 scripts/run_sweep.py --spec my_spec.json --repeats 7
"""

import argparse
import sys
from pathlib import Path

from sqa.bench import BenchSpec, default_spec, emit_csv, run_bench, run_metadata, speedup_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spec", help="bench spec JSON; default is the desk sweep")
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--repeats", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--seq-lens", type=int, nargs="+")
    args = ap.parse_args()

    spec = BenchSpec.from_json(Path(args.spec).read_text()) if args.spec else default_spec()
    for name in ("repeats", "threads"):
        if getattr(args, name):
            setattr(spec, name, getattr(args, name))
    if args.seq_lens:
        spec.seq_lens = args.seq_lens
    BenchSpec.from_dict(spec.to_dict())  # revalidate after overrides

    def progress(r):
        t = "skipped: " + r.skip_reason if r.median_seconds is None else f"{r.median_seconds:.4f}s"
        print(f"{r.variant:>10} N={r.N:<7} {t}", file=sys.stderr, flush=True)

    records = run_bench(spec, progress=progress)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(emit_csv(records, run_metadata(spec)))
    if spec.baseline_name:
        table = speedup_table(records, spec.baseline_name)
        (out / "speedup_table.csv").write_text(table.to_csv())
        (out / "speedup_table.txt").write_text(table.format() + "\n")
        print(table.format())
    print(f"wrote {out}/", file=sys.stderr)


if __name__ == "__main__":
    main()
