"""Dense kernel layer: matmul, stable row softmax, head reshaping, seeded init.

Tensors are plain ``numpy.ndarray`` objects in C (row-major) order. float64 is
the default dtype; float32 is accepted everywhere for benchmarking.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

import numpy as np

# Added to disallowed logits before softmax. Finite on purpose: -inf * 0 in the
# backward pass would produce NaN.
MASK_SENTINEL = -1e30

# Any row whose maximum is below this is considered fully masked.
_FULLY_MASKED = MASK_SENTINEL / 2

THREADS_ENV = "SQA_NUM_THREADS"

# Upper bound on score-matrix elements held at once by the row-blocked kernels.
SCORE_BLOCK_ELEMENTS = 1 << 19


class ShapeError(ValueError):
    pass


class FullyMaskedRowError(ValueError):
    pass


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return a @ b


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Softmax along the last axis with per-row max subtraction.

    Masked logits must already carry ``MASK_SENTINEL``. A row made only of
    masked entries raises ``FullyMaskedRowError``.
    """
    m = x.max(axis=-1, keepdims=True)
    if np.any(m <= _FULLY_MASKED):
        bad = np.argwhere(m[..., 0] <= _FULLY_MASKED)[0]
        raise FullyMaskedRowError(f"fully masked row at index {tuple(int(i) for i in bad)}")
    e = x - m
    np.exp(e, out=e)
    e *= 1.0 / e.sum(axis=-1, keepdims=True)
    return e


def split_heads(x: np.ndarray, h: int, d: int) -> np.ndarray:
    """(N, h*d) -> (N, h, d); element (n, i, j) is input (n, i*d + j)."""
    if x.ndim != 2 or x.shape[1] != h * d:
        raise ShapeError(f"split_heads: cannot split {x.shape} into {h} heads of {d}")
    return x.reshape(x.shape[0], h, d).copy()


def merge_heads(x: np.ndarray) -> np.ndarray:
    if x.ndim != 3:
        raise ShapeError(f"merge_heads: expected (N, h, d), got {x.shape}")
    n, h, d = x.shape
    return x.reshape(n, h * d).copy()


class SeededRng:
    """Deterministic generator backed by numpy's PCG64 bit generator.

    PCG64 output for a given seed is fixed across numpy versions and platforms,
    which is what the fixtures rely on.
    """

    def __init__(self, seed: int):
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=shape)

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high]."""
        return int(self._gen.integers(low, high, endpoint=True))

    def choice(self, seq):
        return seq[int(self._gen.integers(0, len(seq)))]


def seeded_init(shape, rng: SeededRng, fan_in: int) -> np.ndarray:
    if fan_in < 1:
        raise ValueError(f"fan_in must be >= 1, got {fan_in}")
    shape = tuple(shape)
    if not shape or any(int(s) < 1 for s in shape):
        raise ShapeError(f"invalid shape {shape}")
    s = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-s, s, shape)


def score_block_rows(n_rows: int, n_cols: int) -> int:
    """Query rows per block so a block of scores stays under SCORE_BLOCK_ELEMENTS."""
    return max(1, min(n_rows, SCORE_BLOCK_ELEMENTS // max(n_cols, 1)))


def configured_threads(default: int | None = None) -> int:
    """Thread count from ``SQA_NUM_THREADS``, else ``default``, else 1."""
    env = os.environ.get(THREADS_ENV)
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1, got {env}")
        return n
    return default if default is not None else 1


@contextmanager
def thread_limit(n: int):
    """Pin BLAS/OpenMP pools to ``n`` threads for the duration of the block."""
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=n):
        yield n
