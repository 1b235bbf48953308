"""Closed-form FLOP and memory accounting for one attention forward pass.

Conventions: a multiply-add is 2 FLOPs; softmax costs SOFTMAX_OPS_PER_ELEMENT
per evaluated score (compare, subtract, exp, add, divide). Head repetition is
free. The 1/sqrt(d) scaling and mask addition are not itemized.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

from . import tensor as T
from .attention import kv_cache_size
from .config import AttentionConfig

SOFTMAX_OPS_PER_ELEMENT = 5


@dataclass(frozen=True)
class FlopReport:
    qkv_projection_flops: int
    score_flops: int
    aggregation_flops: int
    output_projection_flops: int
    softmax_flops: int
    total: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "FlopReport":
        d = json.loads(text)
        names = {f.name for f in fields(cls)}
        if set(d) != names:
            raise ValueError(f"FlopReport JSON keys must be exactly {sorted(names)}")
        report = cls(**d)
        if report.total != sum(getattr(report, n) for n in names - {"total"}):
            raise ValueError("FlopReport total does not equal the sum of its components")
        return report


def evaluated_scores(cfg: AttentionConfig, n: int, mode: str = "dense") -> int:
    """Score entries computed per head.

    ``dense`` counts what the kernels execute: every (i, j) for unmasked and
    causal layers, a fixed band of ``window_span`` columns per row for
    windowed layers. ``effective`` counts only allowed (i, j) pairs.
    """
    if mode == "dense":
        return n * cfg.window_span(n)
    if mode != "effective":
        raise ValueError(f"mode must be 'dense' or 'effective', got {mode!r}")
    if cfg.mask == "none":
        return n * n
    if cfg.mask == "causal":
        return n * (n + 1) // 2
    total = 0
    for i in range(n):
        if cfg.mask == "sliding":
            half = cfg.window // 2
            total += min(n - 1, i + half) - max(0, i - half) + 1
        else:
            total += i - max(0, i - cfg.window + 1) + 1
    return total


def attention_flops(cfg: AttentionConfig, n: int, mode: str = "dense") -> FlopReport:
    if n < 1:
        raise ValueError(f"sequence length must be >= 1, got {n}")
    d = cfg.d_head
    h = cfg.effective_heads
    scores = evaluated_scores(cfg, n, mode)
    qkv = 2 * n * cfg.d_model * (cfg.H_q + 2 * cfg.H_kv) * d
    score = 2 * h * scores * d
    agg = 2 * h * scores * d
    out = 2 * n * (h * d) * cfg.d_model
    soft = SOFTMAX_OPS_PER_ELEMENT * h * scores
    return FlopReport(qkv, score, agg, out, soft, qkv + score + agg + out + soft)


def theoretical_speedup(H: int, H_q: int) -> float:
    """Attention-score FLOP ratio of an H-head baseline over H_q query heads."""
    if H < 1 or H_q < 1 or H_q > H:
        raise ValueError(f"need 1 <= H_q <= H, got H={H}, H_q={H_q}")
    return H / H_q


class MemoryReport(NamedTuple):
    kv_cache_bytes: int
    activation_bytes: int


def memory_report(cfg: AttentionConfig, n: int, bytes_per_element: int, retained: bool = True) -> MemoryReport:
    """KV-cache size and activation footprint of one forward pass.

    Activations: Q, K, V as projected, the repeated side, every head's logits
    and weights, head outputs and the layer output. With ``retained=False``
    only one row block of logits and weights is alive at a time, as in the
    cache-free kernel.
    """
    if n < 1 or bytes_per_element < 1:
        raise ValueError("n and bytes_per_element must be positive")
    d = cfg.d_head
    h = cfg.effective_heads
    q = n * cfg.H_q * d
    kv = 2 * n * cfg.H_kv * d
    repeated = n * h * d * (1 if cfg.reverse else 2) if cfg.group > 1 else 0
    if retained:
        score_terms = 2 * h * n * n
    else:
        width = cfg.window_span(n)
        if cfg.mask in ("sliding", "causal_sliding"):
            rows = T.score_block_rows(n, width * d)
            # logits, weights, plus the gathered key and value bands
            score_terms = 2 * rows * width + 2 * rows * width * d
        else:
            score_terms = 2 * T.score_block_rows(n, n) * n
    outputs = n * h * d + n * cfg.d_model
    elements = q + kv + repeated + score_terms + outputs
    return MemoryReport(kv_cache_size(cfg, n, bytes_per_element), elements * bytes_per_element)
