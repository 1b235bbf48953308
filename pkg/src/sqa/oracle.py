"""Slow scalar-loop reference for the attention layer.

Everything here runs on Python floats in nested lists: projections, masking,
softmax and aggregation are written out as explicit loops and share no code
with ``sqa.tensor`` or ``sqa.attention``. Agreement between the two is
therefore evidence rather than tautology.

The loops double as an instrumented FLOP counter: every multiply-add and every
softmax element operation increments a ``FlopCounter`` field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import AttentionConfig

SENTINEL = -1e30


@dataclass
class FlopCounter:
    """Scalar operation tallies from one oracle forward pass.

    Multiply-adds are counted once each; ``as_flops`` doubles them. Softmax
    operations are counted one per element op (compare, subtract, exp, add,
    divide). ``other`` holds the 1/sqrt(d) scaling and mask additions, which
    the cost model does not itemize.
    """

    qkv_projection_macs: int = 0
    score_macs: int = 0
    aggregation_macs: int = 0
    output_projection_macs: int = 0
    softmax_ops: int = 0
    other: int = 0

    def as_flops(self) -> dict[str, int]:
        out = {
            "qkv_projection_flops": 2 * self.qkv_projection_macs,
            "score_flops": 2 * self.score_macs,
            "aggregation_flops": 2 * self.aggregation_macs,
            "output_projection_flops": 2 * self.output_projection_macs,
            "softmax_flops": self.softmax_ops,
        }
        out["total"] = sum(out.values())
        return out


def _linear(rows, w, counter, field):
    """rows (N x a) times w (a x b) by triple loop."""
    n_in = len(w)
    n_out = len(w[0])
    out = []
    for r in rows:
        row = []
        for j in range(n_out):
            acc = 0.0
            for t in range(n_in):
                acc += r[t] * w[t][j]
            row.append(acc)
        out.append(row)
    if counter is not None:
        setattr(counter, field, getattr(counter, field) + len(rows) * n_in * n_out)
    return out


def _head_slice(rows, head, d):
    return [r[head * d:(head + 1) * d] for r in rows]


def _is_allowed(cfg: AttentionConfig, i: int, j: int) -> bool:
    if cfg.mask == "causal":
        return j <= i
    if cfg.mask == "sliding":
        half = cfg.window // 2
        return i - half <= j <= i + half
    if cfg.mask == "causal_sliding":
        return i - cfg.window + 1 <= j <= i
    return True


def _columns(cfg: AttentionConfig, i: int, n: int, skip_masked: bool) -> list[int]:
    """Key columns evaluated for query row ``i``."""
    if skip_masked:
        return [j for j in range(n) if _is_allowed(cfg, i, j)]
    if cfg.mask == "sliding":
        width = min(n, 2 * (cfg.window // 2) + 1)
        start = i - cfg.window // 2
    elif cfg.mask == "causal_sliding":
        width = min(n, cfg.window)
        start = i - cfg.window + 1
    else:
        return list(range(n))
    start = max(0, min(start, n - width))
    return list(range(start, start + width))


def naive_forward(
    x,
    params,
    cfg: AttentionConfig,
    counter: FlopCounter | None = None,
    skip_masked: bool = False,
) -> np.ndarray:
    """Reference forward pass, always in float64.

    Dense masks evaluate every (i, j) and mask afterwards; windowed masks
    evaluate a fixed-width band per row. With ``skip_masked`` only allowed
    pairs are evaluated at all.
    """
    xs = [[float(v) for v in row] for row in np.asarray(x, dtype=np.float64)]
    wq, wk, wv, wo = (np.asarray(w, dtype=np.float64).tolist() for w in (params.W_Q, params.W_K, params.W_V, params.W_O))
    if len(xs[0]) != cfg.d_model:
        raise ValueError(f"input width {len(xs[0])} != d_model {cfg.d_model}")
    for name, w, rows, cols in (
        ("W_Q", wq, cfg.d_model, cfg.H_q * cfg.d_head),
        ("W_K", wk, cfg.d_model, cfg.H_kv * cfg.d_head),
        ("W_V", wv, cfg.d_model, cfg.H_kv * cfg.d_head),
        ("W_O", wo, max(cfg.H_q, cfg.H_kv) * cfg.d_head, cfg.d_model),
    ):
        if len(w) != rows or len(w[0]) != cols:
            raise ValueError(f"{name} is {len(w)}x{len(w[0])}, expected {rows}x{cols}")

    n = len(xs)
    d = cfg.d_head
    q = _linear(xs, wq, counter, "qkv_projection_macs")
    k = _linear(xs, wk, counter, "qkv_projection_macs")
    v = _linear(xs, wv, counter, "qkv_projection_macs")

    n_heads = max(cfg.H_q, cfg.H_kv)
    inv_sqrt_d = 1.0 / math.sqrt(d)
    concat = [[] for _ in range(n)]
    for head in range(n_heads):
        # consecutive heads share a source head on the smaller side
        qh = head // (n_heads // cfg.H_q)
        kh = head // (n_heads // cfg.H_kv)
        Q = _head_slice(q, qh, d)
        K = _head_slice(k, kh, d)
        V = _head_slice(v, kh, d)
        for i in range(n):
            cols = _columns(cfg, i, n, skip_masked)
            logits = []
            for j in cols:
                s = 0.0
                for t in range(d):
                    s += Q[i][t] * K[j][t]
                s *= inv_sqrt_d
                if not _is_allowed(cfg, i, j):
                    s += SENTINEL
                    if counter is not None:
                        counter.other += 1
                logits.append(s)
            if counter is not None:
                counter.score_macs += len(cols) * d
                counter.other += len(cols)

            m = -math.inf
            for s in logits:
                if s > m:
                    m = s
            if m <= SENTINEL / 2:
                raise ValueError(f"fully masked row {i} in head {head}")
            shifted = [s - m for s in logits]
            exps = [math.exp(s) for s in shifted]
            total = 0.0
            for e in exps:
                total += e
            weights = [e / total for e in exps]
            if counter is not None:
                # one compare, subtract, exp, add and divide per element
                counter.softmax_ops += len(logits) + len(shifted) + len(exps) + len(exps) + len(weights)

            out = [0.0] * d
            for w_ij, j in zip(weights, cols):
                for t in range(d):
                    out[t] += w_ij * V[j][t]
            if counter is not None:
                counter.aggregation_macs += len(cols) * d
            concat[i].extend(out)

    y = _linear(concat, wo, counter, "output_projection_macs")
    return np.array(y, dtype=np.float64)


class DiffReport(NamedTuple):
    max_abs: float
    max_rel: float
    argmax: tuple[int, ...]


def diff_report(a, b) -> DiffReport:
    """Elementwise comparison; ``argmax`` locates the largest absolute difference."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"diff_report: shape mismatch {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    rel = diff / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-30)
    idx = np.unravel_index(int(np.argmax(diff)), a.shape)
    return DiffReport(float(diff.max()), float(rel.max()), tuple(int(i) for i in idx))
