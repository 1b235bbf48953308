import json
from dataclasses import asdict

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqa.attention import build_mask, init_params
from sqa.config import AttentionConfig
from sqa.cost import FlopReport, attention_flops, evaluated_scores, memory_report, theoretical_speedup
from sqa.oracle import FlopCounter, naive_forward
from sqa.tensor import SeededRng


def score(H, hq, hkv=None, n=1024, d_model=None, **kw):
    hkv = hkv or hq
    c = AttentionConfig(d_model or 16 * H, H, hq, hkv, **kw)
    return attention_flops(c, n).score_flops


def test_symmetric_halving_is_exactly_two():
    assert score(16, 16) == 2 * score(16, 8)


def test_quarter_heads_of_32():
    assert score(32, 32) == 4 * score(32, 8)


def test_single_token():
    c = AttentionConfig(64, 8, 4, 2)
    assert attention_flops(c, 1).score_flops == 2 * 4 * 8


def test_reverse_uses_kv_heads():
    c = AttentionConfig(64, 8, 2, 8, allow_reverse=True)
    assert attention_flops(c, 10).score_flops == 2 * 8 * 100 * 8


def test_component_formulas():
    c = AttentionConfig(256, 16, 8, 4)
    n = 100
    r = attention_flops(c, n)
    assert r.qkv_projection_flops == 2 * n * 256 * (8 + 8) * 16
    assert r.score_flops == r.aggregation_flops == 2 * 8 * n * n * 16
    assert r.output_projection_flops == 2 * n * 128 * 256
    assert r.softmax_flops == 5 * 8 * n * n
    assert r.total == sum(v for k, v in asdict(r).items() if k != "total")


def test_sliding_replaces_one_factor():
    c = AttentionConfig(64, 4, 4, 4, mask="sliding", window=128)
    n = 4096
    assert attention_flops(c, n).score_flops == 2 * 4 * n * 129 * 16
    short = attention_flops(c, 50).score_flops
    assert short == 2 * 4 * 50 * 50 * 16
    cs = AttentionConfig(64, 4, 4, 4, mask="causal_sliding", window=128)
    assert attention_flops(cs, n).score_flops == 2 * 4 * n * 128 * 16


def test_causal_counted_dense_by_default():
    dense = AttentionConfig(64, 4, 4, 4)
    causal = AttentionConfig(64, 4, 4, 4, mask="causal")
    assert attention_flops(dense, 33) == attention_flops(causal, 33)
    assert evaluated_scores(causal, 33, "effective") == 33 * 34 // 2


def test_effective_counts_match_mask():
    for mode, k in [("none", None), ("causal", None), ("sliding", 3), ("causal_sliding", 4), ("sliding", 40)]:
        c = AttentionConfig(8, 2, 2, 2, mask=mode, window=k)
        for n in (1, 5, 17):
            assert evaluated_scores(c, n, "effective") == int((build_mask(mode, n, k) == 0).sum())


@pytest.mark.parametrize("H,hq,expected", [(16, 8, 2.0), (16, 16, 1.0), (8, 1, 8.0), (32, 8, 4.0)])
def test_theoretical_speedup(H, hq, expected):
    assert theoretical_speedup(H, hq) == expected


@pytest.mark.parametrize("H,hq", [(0, 1), (4, 0), (4, 5)])
def test_theoretical_speedup_rejects(H, hq):
    with pytest.raises(ValueError):
        theoretical_speedup(H, hq)


@given(st.sampled_from([1, 2, 4, 8, 16, 32, 64]), st.data())
def test_score_ratio_equals_head_ratio(H, data):
    hq = data.draw(st.integers(1, H))
    n = data.draw(st.integers(1, 5000))
    mha = attention_flops(AttentionConfig(4 * H, H, H, H), n).score_flops
    sqa = attention_flops(AttentionConfig(4 * H, H, hq, 1), n).score_flops
    assert mha * hq == sqa * H
    assert theoretical_speedup(H, hq) == H / hq


def _valid(**kw):
    try:
        return AttentionConfig(**kw)
    except ValueError:
        return None


@given(
    st.sampled_from([1, 2, 4, 8]),
    st.integers(1, 8),
    st.integers(1, 8),
    st.integers(1, 300),
    st.sampled_from(["none", "causal", "sliding", "causal_sliding"]),
)
def test_total_strictly_monotone(H, hq, hkv, n, mask):
    window = 5 if "sliding" in mask else None
    base = dict(d_model=4 * H, H=8, H_q=hq, H_kv=hkv, d_head=4, mask=mask, window=window, allow_reverse=True)
    c = _valid(**base)
    if c is None:
        return
    t = attention_flops(c, n).total
    assert attention_flops(c, n + 1).total > t
    for field in ("H_q", "H_kv", "d_model"):
        for bigger in range(base[field] + 1, base[field] + 9):
            c2 = _valid(**{**base, field: bigger})
            if c2 is not None:
                assert attention_flops(c2, n).total > t
                break


class TestMemory:
    def test_gqa_xsqa_cache_parity(self):
        gqa = memory_report(AttentionConfig(512, 32, 32, 8), 2048, 2)
        xsqa = memory_report(AttentionConfig(512, 32, 8, 8), 2048, 2)
        assert gqa.kv_cache_bytes == xsqa.kv_cache_bytes

    def test_cache_linear_in_n(self):
        c = AttentionConfig(256, 16, 8, 4)
        assert memory_report(c, 2000, 4).kv_cache_bytes == 2 * memory_report(c, 1000, 4).kv_cache_bytes

    def test_scores_dominate_long_sequences(self):
        c = AttentionConfig(256, 16, 8, 4)
        n, b = 4096, 4
        total = memory_report(c, n, b).activation_bytes
        scores = 2 * 8 * n * n * b
        assert scores > 0.9 * total
        assert scores > 10 * (total - scores)

    def test_cache_free_footprint_is_bounded(self):
        c = AttentionConfig(256, 16, 16, 16)
        retained = memory_report(c, 8192, 4).activation_bytes
        streamed = memory_report(c, 8192, 4, retained=False).activation_bytes
        assert streamed < retained / 100


class TestFlopReportJSON:
    def test_field_names(self):
        r = attention_flops(AttentionConfig(32, 4, 2, 1), 9)
        d = json.loads(r.to_json())
        assert set(d) == {
            "qkv_projection_flops",
            "score_flops",
            "aggregation_flops",
            "output_projection_flops",
            "softmax_flops",
            "total",
        }
        assert FlopReport.from_json(r.to_json()) == r

    def test_rejects_inconsistent_total(self):
        d = asdict(attention_flops(AttentionConfig(32, 4, 2, 1), 9))
        d["total"] += 1
        with pytest.raises(ValueError):
            FlopReport.from_json(json.dumps(d))


@given(
    st.sampled_from([(4, 4, 4, False), (4, 4, 1, False), (8, 4, 2, False), (8, 2, 4, True), (4, 1, 1, False)]),
    st.integers(1, 16),
    st.sampled_from(["none", "causal", "sliding", "causal_sliding"]),
    st.integers(1, 6),
    st.booleans(),
)
def test_oracle_instrumented_counts(heads, n, mask, window, effective):
    H, hq, hkv, rev = heads
    c = AttentionConfig(2 * H, H, hq, hkv, mask=mask, window=window if "sliding" in mask else None, allow_reverse=rev)
    rng = SeededRng(n)
    counter = FlopCounter()
    naive_forward(rng.normal((n, c.d_model)), init_params(c, rng), c, counter, skip_masked=effective)
    mode = "effective" if effective else "dense"
    assert counter.as_flops() == asdict(attention_flops(c, n, mode))


def test_dense_execution_matches_effective_when_unmasked():
    c = AttentionConfig(16, 4, 2, 1)
    assert attention_flops(c, 12) == attention_flops(c, 12, "effective")
    np.testing.assert_equal(evaluated_scores(c, 12), 144)
