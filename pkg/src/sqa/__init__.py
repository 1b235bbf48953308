"""Attention layers with fewer query heads than the full head count, plus a
FLOP model, a scalar reference implementation and a CPU timing harness."""

from .attention import (
    AttentionParams,
    build_mask,
    grad_check,
    init_params,
    kv_cache_size,
    sqa_backward,
    sqa_forward,
)
from .config import AttentionConfig, ConfigError, VariantTag, classify_variant
from .cost import FlopReport, MemoryReport, attention_flops, memory_report, theoretical_speedup
from .oracle import naive_forward

__all__ = [
    "AttentionConfig",
    "AttentionParams",
    "ConfigError",
    "FlopReport",
    "MemoryReport",
    "VariantTag",
    "attention_flops",
    "build_mask",
    "classify_variant",
    "grad_check",
    "init_params",
    "kv_cache_size",
    "memory_report",
    "naive_forward",
    "sqa_backward",
    "sqa_forward",
    "theoretical_speedup",
]
