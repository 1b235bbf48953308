"""Toy regression fit of a single attention layer by plain gradient descent."""

from __future__ import annotations

import math

import numpy as np

from .attention import init_params, sqa_backward, sqa_forward
from .config import AttentionConfig
from .tensor import SeededRng


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"loss became {loss} at step {step}")
        self.step = step
        self.loss = loss


def toy_train(cfg: AttentionConfig, steps: int, learning_rate: float, seed: int, n: int = 8) -> list[float]:
    """Fit the layer to a fixed random input -> target map; return per-step MSE.

    Entry ``t`` is the loss evaluated before update ``t``.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    rng = SeededRng(seed)
    params = init_params(cfg, rng)
    x = rng.normal((n, cfg.d_model))
    target = rng.normal((n, cfg.d_model))

    losses = []
    for step in range(steps):
        y, cache = sqa_forward(x, params, cfg, want_cache=True)
        err = y - target
        loss = float(np.mean(err**2))
        if not math.isfinite(loss):
            raise TrainingDiverged(step, loss)
        losses.append(loss)
        _, grads = sqa_backward(cache, params, cfg, 2.0 * err / err.size)
        for name, w in params.items():
            w -= learning_rate * getattr(grads, name)
    return losses
