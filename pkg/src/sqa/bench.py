"""Forward-pass timing sweep over attention variants and sequence lengths."""

from __future__ import annotations

import csv
import io
import json
import platform
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .attention import init_params, param_shapes, sqa_forward
from .config import AttentionConfig, ConfigError, VariantTag, classify_variant
from .cost import attention_flops, memory_report

CSV_HEADER = ["variant", "N", "median_s", "mean_s", "stddev_s", "min_s", "flops", "speedup"]
PRECISIONS = {"f64": np.float64, "f32": np.float32}

DEFAULT_SEQ_LENS = [512, 1024, 2048, 4096, 8192]


@dataclass(frozen=True)
class Variant:
    name: str
    config: AttentionConfig

    @property
    def tag(self) -> VariantTag:
        return classify_variant(self.config)


@dataclass
class BenchSpec:
    variants: list[Variant]
    seq_lens: list[int] = field(default_factory=lambda: list(DEFAULT_SEQ_LENS))
    repeats: int = 5
    warmup: int = 1
    precision: str = "f32"
    seed: int = 0
    threads: int = 1
    memory_budget_bytes: int = 2 << 30
    baseline: str | None = None

    def __post_init__(self):
        problems = []
        if not self.variants:
            problems.append("no variants")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            problems.append(f"variant names must be unique: {names}")
        if len({(v.config.d_model, v.config.H) for v in self.variants}) > 1:
            problems.append("all variants must share d_model and H")
        if not self.seq_lens or any(n < 1 for n in self.seq_lens):
            problems.append(f"sequence lengths must be positive: {self.seq_lens}")
        if self.repeats < 3:
            problems.append(f"repeats must be >= 3, got {self.repeats}")
        if self.warmup < 0:
            problems.append(f"warmup must be >= 0, got {self.warmup}")
        if self.precision not in PRECISIONS:
            problems.append(f"precision must be one of {sorted(PRECISIONS)}")
        if self.threads < 1:
            problems.append(f"threads must be >= 1, got {self.threads}")
        if self.baseline is not None and self.baseline not in names:
            problems.append(f"baseline {self.baseline!r} is not a variant")
        if problems:
            raise ConfigError("invalid BenchSpec: " + "; ".join(problems))

    @property
    def baseline_name(self) -> str | None:
        """Explicit baseline, else the first unmasked MHA-shaped variant."""
        if self.baseline is not None:
            return self.baseline
        mha = [v for v in self.variants if v.tag is VariantTag.MHA]
        unmasked = [v for v in mha if v.config.mask == "none"]
        pick = unmasked or mha
        return pick[0].name if pick else None

    @classmethod
    def from_dict(cls, d: dict) -> "BenchSpec":
        d = dict(d)
        variants = []
        for item in d.pop("variants"):
            if "config" in item:
                cfg = AttentionConfig.from_dict(item["config"])
                name = item.get("name") or classify_variant(cfg).value
            else:
                cfg = AttentionConfig.from_dict(item)
                name = classify_variant(cfg).value
            variants.append(Variant(name, cfg))
        known = {"seq_lens", "repeats", "warmup", "precision", "seed", "threads", "memory_budget_bytes", "baseline"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown bench spec keys: {sorted(unknown)}")
        return cls(variants=variants, **d)

    @classmethod
    def from_json(cls, text: str) -> "BenchSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "variants": [{"name": v.name, "config": v.config.to_dict()} for v in self.variants],
            "seq_lens": list(self.seq_lens),
            "repeats": self.repeats,
            "warmup": self.warmup,
            "precision": self.precision,
            "seed": self.seed,
            "threads": self.threads,
            "memory_budget_bytes": self.memory_budget_bytes,
            "baseline": self.baseline,
        }


def default_spec(**overrides) -> BenchSpec:
    """The desk-scale sweep: d_model=256, H=16, the variants of the long-sequence table."""

    def cfg(hq, hkv, **kw):
        return AttentionConfig(d_model=256, H=16, H_q=hq, H_kv=hkv, **kw)

    variants = [
        Variant("xSQA", cfg(4, 4)),
        Variant("SQA", cfg(8, 4)),
        Variant("sSQA", cfg(8, 8)),
        Variant("SWA(128)", cfg(16, 16, mask="sliding", window=128)),
        Variant("MQA", cfg(16, 1)),
        Variant("GQA", cfg(16, 4)),
        Variant("MHA", cfg(16, 16)),
    ]
    return BenchSpec(variants=variants, **overrides)


@dataclass
class BenchRecord:
    """Timing of one (variant, N) cell. Timing fields are None for skipped cells."""

    variant: str
    tag: str
    config: AttentionConfig
    N: int
    median_seconds: float | None
    mean_seconds: float | None
    stddev_seconds: float | None
    min_seconds: float | None
    modeled_flops: int
    achieved_speedup_vs_baseline: float | None
    skip_reason: str | None = None


def _time_cell(variant: Variant, n: int, spec: BenchSpec, clock) -> list[float]:
    dtype = PRECISIONS[spec.precision]
    rng = T.SeededRng(spec.seed)
    x = rng.normal((n, variant.config.d_model)).astype(dtype)
    params = init_params(variant.config, rng).astype(dtype)
    for _ in range(spec.warmup):
        sqa_forward(x, params, variant.config)
    times = []
    for _ in range(spec.repeats):
        t0 = clock()
        sqa_forward(x, params, variant.config)
        times.append(clock() - t0)
    return times


def run_bench(spec: BenchSpec, clock=time.perf_counter, progress=None) -> list[BenchRecord]:
    """Time every cell of the sweep; returns records sorted by (N, variant).

    Cells whose memory estimate exceeds the budget are skipped and recorded
    with a reason rather than aborting the sweep.
    """
    nbytes = np.dtype(PRECISIONS[spec.precision]).itemsize
    threads = T.configured_threads(spec.threads)
    records = []
    with T.thread_limit(threads):
        for n in spec.seq_lens:
            for v in spec.variants:
                flops = attention_flops(v.config, n).total
                mem = memory_report(v.config, n, nbytes, retained=False)
                need = mem.activation_bytes + nbytes * sum(a * b for a, b in param_shapes(v.config).values())
                if need > spec.memory_budget_bytes:
                    reason = f"memory estimate {need} B exceeds budget {spec.memory_budget_bytes} B"
                    records.append(BenchRecord(v.name, v.tag.value, v.config, n, None, None, None, None, flops, None, reason))
                    continue
                times = _time_cell(v, n, spec, clock)
                records.append(
                    BenchRecord(
                        v.name,
                        v.tag.value,
                        v.config,
                        n,
                        statistics.median(times),
                        statistics.fmean(times),
                        statistics.stdev(times),
                        min(times),
                        flops,
                        None,
                    )
                )
                if progress is not None:
                    progress(records[-1])
    _fill_speedups(records, spec.baseline_name)
    records.sort(key=lambda r: (r.N, r.variant))
    return records


def _fill_speedups(records: list[BenchRecord], baseline: str | None) -> None:
    if baseline is None:
        return
    base = {r.N: r.median_seconds for r in records if r.variant == baseline}
    for r in records:
        b = base.get(r.N)
        if b is not None and r.median_seconds is not None:
            r.achieved_speedup_vs_baseline = b / r.median_seconds


def run_metadata(spec: BenchSpec) -> dict[str, str]:
    return {
        "threads": str(T.configured_threads(spec.threads)),
        "precision": spec.precision,
        "batch": "1",
        "seed": str(spec.seed),
        "repeats": str(spec.repeats),
        "warmup": str(spec.warmup),
        "numpy": np.__version__,
        "machine": platform.machine(),
    }


def _fmt(v) -> str:
    return "" if v is None else repr(v)


def emit_csv(records: list[BenchRecord], metadata: dict[str, str] | None = None) -> str:
    """CSV with ``#`` metadata lines, including each variant's config JSON."""
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}={value}\n")
    seen = {}
    for r in records:
        seen.setdefault(r.variant, r.config)
    for name, cfg in seen.items():
        buf.write(f"# variant {json.dumps(name)} {cfg.to_json()}\n")
    for r in records:
        if r.skip_reason:
            buf.write(f"# skipped {json.dumps(r.variant)} {r.N} {r.skip_reason}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(
            [
                r.variant,
                r.N,
                _fmt(r.median_seconds),
                _fmt(r.mean_seconds),
                _fmt(r.stddev_seconds),
                _fmt(r.min_seconds),
                r.modeled_flops,
                _fmt(r.achieved_speedup_vs_baseline),
            ]
        )
    return buf.getvalue()


def parse_csv(text: str) -> tuple[list[BenchRecord], dict[str, str]]:
    metadata, configs, skipped = {}, {}, {}
    body = []
    for line in text.splitlines():
        if not line.startswith("#"):
            body.append(line)
            continue
        content = line[1:].strip()
        if content.startswith("variant "):
            dec = json.JSONDecoder()
            name, end = dec.raw_decode(content, len("variant "))
            configs[name] = AttentionConfig.from_json(content[end:].strip())
        elif content.startswith("skipped "):
            dec = json.JSONDecoder()
            name, end = dec.raw_decode(content, len("skipped "))
            n_str, reason = content[end:].strip().split(" ", 1)
            skipped[(name, int(n_str))] = reason
        else:
            key, _, value = content.partition("=")
            metadata[key] = value

    def num(s):
        return None if s == "" else float(s)

    rows = list(csv.reader(body))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError(f"expected CSV header {CSV_HEADER}")
    records = []
    for row in rows[1:]:
        name, n = row[0], int(row[1])
        if name not in configs:
            raise ValueError(f"no config metadata line for variant {name!r}")
        cfg = configs[name]
        records.append(
            BenchRecord(
                name,
                classify_variant(cfg).value,
                cfg,
                n,
                num(row[2]),
                num(row[3]),
                num(row[4]),
                num(row[5]),
                int(row[6]),
                num(row[7]),
                skipped.get((name, n)),
            )
        )
    return records, metadata


@dataclass
class SpeedupTable:
    """Median seconds (rows = N, columns = variants) plus baseline/variant ratios."""

    ns: list[int]
    columns: list[str]
    seconds: dict[tuple[int, str], float | None]
    ratios: dict[tuple[int, str], float | None]
    baseline: str

    def format(self) -> str:
        width = max(10, *(len(c) + 2 for c in self.columns))

        def block(title, values, fmt):
            lines = [title, "N".rjust(8) + "".join(c.rjust(width) for c in self.columns)]
            for n in self.ns:
                cells = []
                for c in self.columns:
                    v = values.get((n, c))
                    cells.append(("skip" if v is None else fmt(v)).rjust(width))
                lines.append(f"{n:>8}" + "".join(cells))
            return "\n".join(lines)

        return (
            block("median seconds per forward pass", self.seconds, lambda v: f"{v:.4f}")
            + "\n\n"
            + block(f"speedup vs {self.baseline}", self.ratios, lambda v: f"{v:.2f}x")
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N"] + [f"{c}_s" for c in self.columns] + [f"{c}_speedup" for c in self.columns])
        for n in self.ns:
            w.writerow(
                [n]
                + [_fmt(self.seconds.get((n, c))) for c in self.columns]
                + [_fmt(self.ratios.get((n, c))) for c in self.columns]
            )
        return buf.getvalue()


def speedup_table(records: list[BenchRecord], baseline: str) -> SpeedupTable:
    ns = sorted({r.N for r in records})
    seconds = {(r.N, r.variant): r.median_seconds for r in records}
    for n in ns:
        if seconds.get((n, baseline)) is None:
            raise ValueError(f"baseline {baseline!r} has no timing at N={n}")
    names = list(dict.fromkeys(r.variant for r in records))
    last = ns[-1]

    def order(name):
        t = seconds.get((last, name))
        return (t is None, t if t is not None else 0.0)

    columns = sorted(names, key=order)
    ratios = {}
    for (n, name), t in seconds.items():
        ratios[(n, name)] = None if t is None else seconds[(n, baseline)] / t
    return SpeedupTable(ns, columns, seconds, ratios, baseline)
