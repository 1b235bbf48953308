"""Self-check suites: oracle equivalence, gradient checks, FLOP identities."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .attention import grad_check, init_params, kv_cache_size, sqa_forward
from .config import AttentionConfig, VariantTag, classify_variant
from .cost import attention_flops, theoretical_speedup
from .oracle import FlopCounter, diff_report, naive_forward
from .tensor import SeededRng

EQUIVALENCE_TOL = 1e-10
GRADIENT_TOL = 1e-4
MASKS = ("none", "causal", "sliding", "causal_sliding")

# (H, H_q, H_kv) shapes covering every variant tag; rSQA needs allow_reverse.
HEAD_LAYOUTS = {
    VariantTag.MHA: (4, 4, 4),
    VariantTag.MQA: (4, 4, 1),
    VariantTag.GQA: (8, 8, 2),
    VariantTag.SQA: (8, 4, 2),
    VariantTag.sSQA: (8, 4, 4),
    VariantTag.xSQA: (8, 2, 1),
    VariantTag.rSQA: (8, 2, 4),
}

SPEEDUP_PAIRS = [(16, 8), (16, 4), (32, 8), (8, 1)]


@dataclass
class CaseResult:
    suite: str
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.suite}: {self.name} - {self.detail}"


def make_config(tag: VariantTag, d_head: int, mask: str, window: int | None = None) -> AttentionConfig:
    H, hq, hkv = HEAD_LAYOUTS[tag]
    return AttentionConfig(
        d_model=H * d_head,
        H=H,
        H_q=hq,
        H_kv=hkv,
        mask=mask,
        window=window if mask in ("sliding", "causal_sliding") else None,
        allow_reverse=tag is VariantTag.rSQA,
    )


def equivalence_cases(count: int = 56, seed: int = 2024) -> list[tuple[AttentionConfig, int, int]]:
    """Deterministic (config, N, seed) triples cycling through every tag and mask."""
    rng = SeededRng(seed)
    tags = list(HEAD_LAYOUTS)
    cases = []
    for i in range(count):
        tag = tags[i % len(tags)]
        mask = MASKS[(i // len(tags)) % len(MASKS)]
        cfg = make_config(tag, rng.integers(1, 4), mask, rng.integers(1, 6))
        cases.append((cfg, rng.integers(1, 9), rng.integers(0, 2**31)))
    return cases


def run_equivalence(count: int = 56) -> list[CaseResult]:
    out = []
    for cfg, n, seed in equivalence_cases(count):
        rng = SeededRng(seed)
        params = init_params(cfg, rng)
        x = rng.normal((n, cfg.d_model))
        ref = naive_forward(x, params, cfg)
        worst = None
        for want_cache in (False, True):
            rep = diff_report(sqa_forward(x, params, cfg, want_cache=want_cache)[0], ref)
            if worst is None or rep.max_rel > worst.max_rel:
                worst = rep
        name = f"{classify_variant(cfg)} H={cfg.H} H_q={cfg.H_q} H_kv={cfg.H_kv} mask={cfg.mask}"
        if cfg.window:
            name += f"({cfg.window})"
        name += f" N={n} seed={seed}"
        out.append(
            CaseResult(
                "equivalence",
                name,
                worst.max_rel <= EQUIVALENCE_TOL,
                f"max_rel={worst.max_rel:.3e} max_abs={worst.max_abs:.3e} at {worst.argmax}",
            )
        )
    return out


def gradient_configs() -> list[AttentionConfig]:
    """One small config per variant tag, plus the masked modes."""
    cfgs = [make_config(tag, 2, "none") for tag in HEAD_LAYOUTS]
    cfgs += [make_config(VariantTag.SQA, 2, m, 3) for m in MASKS[1:]]
    return cfgs


def run_gradients(eps: float = 1e-5) -> list[CaseResult]:
    out = []
    for cfg in gradient_configs():
        err = grad_check(cfg, n=5, seed=7, eps=eps)
        name = f"{classify_variant(cfg)} H={cfg.H} H_q={cfg.H_q} H_kv={cfg.H_kv} mask={cfg.mask}"
        out.append(CaseResult("gradients", name, err <= GRADIENT_TOL, f"max_rel_err={err:.3e} eps={eps:g}"))
    return out


def run_flops() -> list[CaseResult]:
    out = []
    for H, hq in SPEEDUP_PAIRS:
        d_model = 16 * H
        mha = AttentionConfig(d_model, H, H, H)
        sqa = AttentionConfig(d_model, H, hq, hq)
        for n in (1, 1024, 200_000):
            a = attention_flops(mha, n).score_flops
            b = attention_flops(sqa, n).score_flops
            ok = a * hq == b * H and theoretical_speedup(H, hq) == H / hq
            out.append(CaseResult("flops", f"score ratio H={H} H_q={hq} N={n}", ok, f"{a}/{b} vs {H}/{hq}"))

    for tag in HEAD_LAYOUTS:
        for mask in MASKS:
            cfg = make_config(tag, 2, mask, 3)
            for n in (1, 5, 16):
                rng = SeededRng(n)
                params = init_params(cfg, rng)
                counter = FlopCounter()
                naive_forward(rng.normal((n, cfg.d_model)), params, cfg, counter)
                model = asdict(attention_flops(cfg, n))
                counted = counter.as_flops()
                out.append(
                    CaseResult(
                        "flops",
                        f"oracle count {tag} mask={mask} N={n}",
                        counted == model,
                        "match" if counted == model else f"counted={counted} model={model}",
                    )
                )

    gqa = AttentionConfig(512, 32, 32, 8)
    xsqa = AttentionConfig(512, 32, 8, 8)
    mha = AttentionConfig(512, 32, 32, 32)
    mqa = AttentionConfig(512, 32, 32, 1)
    n = 4096
    out.append(
        CaseResult(
            "flops",
            "kv cache xSQA(8,8) == GQA(32,8)",
            kv_cache_size(xsqa, n, 2) == kv_cache_size(gqa, n, 2),
            f"{kv_cache_size(xsqa, n, 2)} vs {kv_cache_size(gqa, n, 2)}",
        )
    )
    out.append(
        CaseResult(
            "flops",
            "kv cache MQA == MHA / H",
            kv_cache_size(mqa, n, 2) * 32 == kv_cache_size(mha, n, 2),
            f"{kv_cache_size(mqa, n, 2)} * 32 vs {kv_cache_size(mha, n, 2)}",
        )
    )
    return out


SUITES = {
    "equivalence": run_equivalence,
    "gradients": run_gradients,
    "flops": run_flops,
}


def run_check(suite: str) -> list[CaseResult]:
    if suite == "all":
        return [r for fn in SUITES.values() for r in fn()]
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES) + ['all']}")
    return SUITES[suite]()
