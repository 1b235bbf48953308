"""MHA / MQA / GQA / SQA attention layer: forward, backward, gradient check.

One code path covers every variant. The config decides how many query and
key/value heads are projected; the smaller side is block-repeated (consecutive
heads share a source head, the GQA convention) until both match, attention
runs per head, and the heads are concatenated and projected back to d_model.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import tensor as T
from .config import AttentionConfig, ConfigError


@dataclass
class AttentionParams:
    W_Q: np.ndarray
    W_K: np.ndarray
    W_V: np.ndarray
    W_O: np.ndarray

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def astype(self, dtype) -> "AttentionParams":
        return AttentionParams(*(np.asarray(w, dtype=dtype) for _, w in self.items()))

    def copy(self) -> "AttentionParams":
        return AttentionParams(*(w.copy() for _, w in self.items()))

    @property
    def num_params(self) -> int:
        return sum(w.size for _, w in self.items())

    def check(self, cfg: AttentionConfig) -> None:
        want = param_shapes(cfg)
        for name, w in self.items():
            if w.shape != want[name]:
                raise T.ShapeError(f"{name} has shape {w.shape}, config requires {want[name]}")


def param_shapes(cfg: AttentionConfig) -> dict[str, tuple[int, int]]:
    d = cfg.d_head
    return {
        "W_Q": (cfg.d_model, cfg.H_q * d),
        "W_K": (cfg.d_model, cfg.H_kv * d),
        "W_V": (cfg.d_model, cfg.H_kv * d),
        # reverse mode concatenates H_kv heads, so W_O grows with it
        "W_O": (cfg.effective_heads * d, cfg.d_model),
    }


def init_params(cfg: AttentionConfig, rng: T.SeededRng) -> AttentionParams:
    shapes = param_shapes(cfg)
    return AttentionParams(**{name: T.seeded_init(s, rng, fan_in=s[0]) for name, s in shapes.items()})


def repeat_heads(t: np.ndarray, target: int) -> np.ndarray:
    """Block-repeat (N, h, d) along the head axis to (N, target, d)."""
    if t.ndim != 3:
        raise T.ShapeError(f"repeat_heads: expected (N, h, d), got {t.shape}")
    h = t.shape[1]
    if target < 1 or target % h:
        raise T.ShapeError(f"repeat_heads: target {target} is not a multiple of {h} heads")
    return np.repeat(t, target // h, axis=1)


def reduce_repeated(grad: np.ndarray, h_src: int) -> np.ndarray:
    """Adjoint of repeat_heads: sum each group of copies back onto its source head."""
    n, target, d = grad.shape
    if target % h_src:
        raise T.ShapeError(f"reduce_repeated: {target} heads do not group into {h_src}")
    return grad.reshape(n, h_src, target // h_src, d).sum(axis=2)


def _allowed(mode: str, window: int | None, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    if mode == "none":
        return np.ones(np.broadcast_shapes(i.shape, j.shape), dtype=bool)
    if mode == "causal":
        return j <= i
    if mode == "sliding":
        return np.abs(i - j) <= window // 2
    if mode == "causal_sliding":
        return (j <= i) & (j >= i - window + 1)
    raise ConfigError(f"unknown mask mode {mode!r}")


def build_mask(mode: str, n: int, window: int | None = None, dtype=np.float64) -> np.ndarray:
    """(n, n) additive mask: 0 where attention is allowed, MASK_SENTINEL elsewhere."""
    if n < 1:
        raise ConfigError(f"sequence length must be >= 1, got {n}")
    if mode in ("sliding", "causal_sliding") and (window is None or window < 1):
        raise ConfigError(f"window must be >= 1 for mask {mode!r}, got {window!r}")
    idx = np.arange(n)
    ok = _allowed(mode, window, idx[:, None], idx[None, :])
    return np.where(ok, 0.0, T.MASK_SENTINEL).astype(dtype)


def _scale(d: int, dtype) -> np.generic:
    return np.dtype(dtype).type(1.0 / np.sqrt(d))


def _head_full(q, k, v, mask):
    logits = T.matmul(q, k.T) * _scale(q.shape[1], q.dtype)
    if mask is not None:
        logits = logits + mask
    weights = T.softmax_rows(logits)
    return logits, weights, T.matmul(weights, v)


def attention_head(q: np.ndarray, k: np.ndarray, v: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """softmax(q k^T / sqrt(d) + mask) v for one head."""
    if q.shape != k.shape or k.shape != v.shape or q.ndim != 2:
        raise T.ShapeError(f"attention_head: shapes {q.shape}, {k.shape}, {v.shape} disagree")
    n = q.shape[0]
    if mask is not None and mask.shape != (n, n):
        raise T.ShapeError(f"attention_head: mask {mask.shape} does not match N={n}")
    return _head_full(q, k, v, mask)[2]


def band_starts(cfg: AttentionConfig, n: int) -> np.ndarray:
    """First key column of each query row's fixed-width band (windowed masks).

    The band is shifted inward at the sequence edges so every row computes
    exactly ``cfg.window_span(n)`` columns and still covers all allowed keys.
    """
    w = cfg.window_span(n)
    rows = np.arange(n)
    lo = rows - cfg.window // 2 if cfg.mask == "sliding" else rows - cfg.window + 1
    return np.clip(lo, 0, n - w)


def _head_blocked(q, k, v, cfg: AttentionConfig) -> np.ndarray:
    """Forward-only head kernel, blocked over query rows to bound memory.

    Dense masks evaluate full rows; windowed masks evaluate only the band.
    """
    n, d = q.shape
    q = q * _scale(d, q.dtype)
    out = np.empty_like(q)
    if cfg.mask in ("sliding", "causal_sliding"):
        w = cfg.window_span(n)
        cols = band_starts(cfg, n)[:, None] + np.arange(w)
        step = T.score_block_rows(n, w * d)
        for r0 in range(0, n, step):
            r1 = min(n, r0 + step)
            c = cols[r0:r1]
            scores = (q[r0:r1, None, :] @ k[c].transpose(0, 2, 1))[:, 0, :]
            ok = _allowed(cfg.mask, cfg.window, np.arange(r0, r1)[:, None], c)
            scores += np.where(ok, 0.0, T.MASK_SENTINEL).astype(scores.dtype)
            p = T.softmax_rows(scores)
            out[r0:r1] = (p[:, None, :] @ v[c])[:, 0, :]
        return out
    kt = np.ascontiguousarray(k.T)
    step = T.score_block_rows(n, n)
    for r0 in range(0, n, step):
        r1 = min(n, r0 + step)
        scores = T.matmul(q[r0:r1], kt)
        if cfg.mask == "causal":
            idx = np.arange(n)
            ok = _allowed("causal", None, idx[r0:r1, None], idx[None, :])
            scores += np.where(ok, 0.0, T.MASK_SENTINEL).astype(scores.dtype)
        p = T.softmax_rows(scores)
        out[r0:r1] = T.matmul(p, v)
    return out


@dataclass
class ForwardCache:
    x: np.ndarray
    q: np.ndarray  # (N, h_eff, d) after repetition
    k: np.ndarray
    v: np.ndarray
    logits: np.ndarray  # (h_eff, N, N), mask included
    weights: np.ndarray  # (h_eff, N, N)
    heads: np.ndarray  # (N, h_eff * d) merged head outputs


def _project(x, params: AttentionParams, cfg: AttentionConfig):
    d = cfg.d_head
    q = T.split_heads(T.matmul(x, params.W_Q), cfg.H_q, d)
    k = T.split_heads(T.matmul(x, params.W_K), cfg.H_kv, d)
    v = T.split_heads(T.matmul(x, params.W_V), cfg.H_kv, d)
    h = cfg.effective_heads
    if cfg.reverse:
        q = repeat_heads(q, h)
    else:
        k = repeat_heads(k, h)
        v = repeat_heads(v, h)
    return q, k, v


def sqa_forward(x: np.ndarray, params: AttentionParams, cfg: AttentionConfig, want_cache: bool = False):
    """Run the layer on ``x`` of shape (N, d_model).

    Returns ``(y, cache)``; ``cache`` is None unless ``want_cache``. Without a
    cache the row-blocked kernel runs; windowed masks then only compute their
    band. With a cache every head's full N x N logits and weights are kept.
    """
    if x.ndim != 2 or x.shape[1] != cfg.d_model:
        raise T.ShapeError(f"input has shape {x.shape}, expected (N, {cfg.d_model})")
    params.check(cfg)
    n = x.shape[0]
    q, k, v = _project(x, params, cfg)
    h = cfg.effective_heads
    heads = np.empty_like(q)
    if not want_cache:
        for i in range(h):
            heads[:, i, :] = _head_blocked(q[:, i, :], k[:, i, :], v[:, i, :], cfg)
        return T.matmul(T.merge_heads(heads), params.W_O), None

    mask = None if cfg.mask == "none" else build_mask(cfg.mask, n, cfg.window, dtype=q.dtype)
    logits = np.empty((h, n, n), dtype=q.dtype)
    weights = np.empty_like(logits)
    for i in range(h):
        logits[i], weights[i], heads[:, i, :] = _head_full(q[:, i, :], k[:, i, :], v[:, i, :], mask)
    merged = T.merge_heads(heads)
    y = T.matmul(merged, params.W_O)
    return y, ForwardCache(x=x.copy(), q=q, k=k, v=v, logits=logits, weights=weights, heads=merged)


def sqa_backward(cache: ForwardCache | None, params: AttentionParams, cfg: AttentionConfig, dy: np.ndarray):
    """Gradients of sum(y * dy) w.r.t. the input and all four weight matrices.

    Returns ``(dx, dparams)`` with ``dparams`` shaped like ``params``.
    """
    if cache is None:
        raise RuntimeError("sqa_backward needs the cache from sqa_forward(..., want_cache=True)")
    x = cache.x
    n = x.shape[0]
    d = cfg.d_head
    h = cfg.effective_heads
    if dy.shape != (n, cfg.d_model):
        raise T.ShapeError(f"dy has shape {dy.shape}, expected {(n, cfg.d_model)}")

    dW_O = T.matmul(cache.heads.T, dy)
    d_heads = T.split_heads(T.matmul(dy, params.W_O.T), h, d)

    scale = _scale(d, cache.q.dtype)
    dq = np.empty_like(cache.q)
    dk = np.empty_like(cache.k)
    dv = np.empty_like(cache.v)
    for i in range(h):
        p = cache.weights[i]
        do = d_heads[:, i, :]
        dv[:, i, :] = T.matmul(p.T, do)
        dp = T.matmul(do, cache.v[:, i, :].T)
        ds = p * (dp - np.sum(dp * p, axis=1, keepdims=True)) * scale
        dq[:, i, :] = T.matmul(ds, cache.k[:, i, :])
        dk[:, i, :] = T.matmul(ds.T, cache.q[:, i, :])

    if cfg.reverse:
        dq = reduce_repeated(dq, cfg.H_q)
    else:
        dk = reduce_repeated(dk, cfg.H_kv)
        dv = reduce_repeated(dv, cfg.H_kv)
    dQ, dK, dV = T.merge_heads(dq), T.merge_heads(dk), T.merge_heads(dv)

    grads = AttentionParams(
        W_Q=T.matmul(x.T, dQ),
        W_K=T.matmul(x.T, dK),
        W_V=T.matmul(x.T, dV),
        W_O=dW_O,
    )
    dx = T.matmul(dQ, params.W_Q.T) + T.matmul(dK, params.W_K.T) + T.matmul(dV, params.W_V.T)
    return dx, grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Elementwise |a - n| / max(|a|, |n|, floor)."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(cfg: AttentionConfig, n: int, seed: int, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Covers every coordinate of the input and of all four weight matrices, for
    the scalar loss sum(y * dy) with a random fixed ``dy``.
    """
    rng = T.SeededRng(seed)
    params = init_params(cfg, rng)
    x = rng.normal((n, cfg.d_model))
    dy = rng.normal((n, cfg.d_model))

    def loss(x_, p_):
        return float(np.sum(sqa_forward(x_, p_, cfg)[0] * dy))

    _, cache = sqa_forward(x, params, cfg, want_cache=True)
    dx, dparams = sqa_backward(cache, params, cfg, dy)

    worst = 0.0
    targets = [("x", x, dx)] + [(name, w, getattr(dparams, name)) for name, w in params.items()]
    for name, arr, analytic in targets:
        numeric = np.empty_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + eps
            up = loss(x, params)
            arr[idx] = orig - eps
            down = loss(x, params)
            arr[idx] = orig
            numeric[idx] = (up - down) / (2 * eps)
        worst = max(worst, float(relative_error(analytic, numeric).max()))
    return worst


def kv_cache_size(cfg: AttentionConfig, n: int, bytes_per_element: int) -> int:
    """Bytes of keys plus values cached for ``n`` tokens."""
    if n < 1 or bytes_per_element < 1:
        raise ValueError("n and bytes_per_element must be positive")
    return 2 * n * cfg.H_kv * cfg.d_head * bytes_per_element
