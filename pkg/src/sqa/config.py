"""Attention layer configuration, JSON round-trip, and variant classification."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum

MASK_MODES = ("none", "causal", "sliding", "causal_sliding")
WINDOWED = ("sliding", "causal_sliding")

_JSON_KEYS = {"d_model", "H", "H_q", "H_kv", "d_head", "mask", "window", "allow_reverse"}


class ConfigError(ValueError):
    pass


class VariantTag(str, Enum):
    MHA = "MHA"
    MQA = "MQA"
    GQA = "GQA"
    SQA = "SQA"
    sSQA = "sSQA"
    xSQA = "xSQA"
    rSQA = "rSQA"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class AttentionConfig:
    """One attention layer.

    ``H`` is the head count of the comparable MHA baseline; ``H_q``/``H_kv``
    are the query and key/value head counts actually used. ``d_head`` defaults
    to ``d_model // H`` regardless of ``H_q``, so sparse-query layers carry
    fewer parameters than the baseline.
    """

    d_model: int
    H: int
    H_q: int
    H_kv: int
    d_head: int | None = None
    mask: str = "none"
    window: int | None = None
    allow_reverse: bool = False

    def __post_init__(self):
        problems = self._violations()
        if problems:
            raise ConfigError("invalid AttentionConfig: " + "; ".join(problems))
        if self.d_head is None:
            object.__setattr__(self, "d_head", self.d_model // self.H)

    def _violations(self) -> list[str]:
        out = []
        for name in ("d_model", "H", "H_q", "H_kv"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                out.append(f"{name} must be a positive integer (got {v!r})")
        if out:
            return out
        if not self.H_q <= self.H:
            out.append(f"H_q <= H violated ({self.H_q} > {self.H})")
        if not self.H_kv <= self.H:
            out.append(f"H_kv <= H violated ({self.H_kv} > {self.H})")
        if self.H_q < self.H_kv:
            if not self.allow_reverse:
                out.append(f"H_kv <= H_q violated ({self.H_kv} > {self.H_q}); set allow_reverse for rSQA")
            elif self.H_kv % self.H_q:
                out.append(f"H_kv mod H_q == 0 violated ({self.H_kv} mod {self.H_q})")
        elif self.H_q % self.H_kv:
            out.append(f"H_q mod H_kv == 0 violated ({self.H_q} mod {self.H_kv})")
        if self.d_head is None:
            if self.d_model % self.H:
                out.append(f"d_head * H == d_model violated (d_model={self.d_model}, H={self.H})")
        elif not isinstance(self.d_head, int) or isinstance(self.d_head, bool) or self.d_head < 1:
            out.append(f"d_head must be a positive integer (got {self.d_head!r})")
        if self.mask not in MASK_MODES:
            out.append(f"mask must be one of {MASK_MODES} (got {self.mask!r})")
        elif self.mask in WINDOWED:
            if not isinstance(self.window, int) or isinstance(self.window, bool) or self.window < 1:
                out.append(f"window must be a positive integer for mask {self.mask!r} (got {self.window!r})")
        elif self.window is not None:
            out.append(f"window is only meaningful for sliding masks (mask={self.mask!r})")
        return out

    @property
    def reverse(self) -> bool:
        return self.H_q < self.H_kv

    @property
    def effective_heads(self) -> int:
        """Heads that actually run attention: H_q, or H_kv in reverse mode."""
        return self.H_kv if self.reverse else self.H_q

    @property
    def group(self) -> int:
        """Repetition factor: copies made of each source head."""
        return self.effective_heads // (self.H_q if self.reverse else self.H_kv)

    def window_span(self, n: int) -> int:
        """Number of key columns one query row touches in the computed band."""
        if self.mask == "sliding":
            return min(n, 2 * (self.window // 2) + 1)
        if self.mask == "causal_sliding":
            return min(n, self.window)
        return n

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "AttentionConfig":
        unknown = set(d) - _JSON_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"d_model", "H", "H_q", "H_kv"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "AttentionConfig":
        d = json.loads(text)
        if not isinstance(d, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(d)


def classify_variant(cfg: AttentionConfig) -> VariantTag:
    H, hq, hkv = cfg.H, cfg.H_q, cfg.H_kv
    if hq == H:
        if hkv == H:
            return VariantTag.MHA
        if hkv == 1:
            return VariantTag.MQA
        return VariantTag.GQA
    if hq < hkv:
        return VariantTag.rSQA
    if 2 * hq == H and hkv == hq:
        return VariantTag.sSQA
    if 4 * hq <= H:
        return VariantTag.xSQA
    return VariantTag.SQA


def load_config(path) -> AttentionConfig:
    with open(path) as f:
        return AttentionConfig.from_json(f.read())
