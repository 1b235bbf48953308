import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqa import tensor
from sqa.bench import (
    CSV_HEADER,
    BenchRecord,
    BenchSpec,
    Variant,
    default_spec,
    emit_csv,
    parse_csv,
    run_bench,
    run_metadata,
    speedup_table,
)
from sqa.config import AttentionConfig, ConfigError


class FakeClock:
    """Each call advances by a fixed step, so every timed pass lasts ``step`` seconds."""

    def __init__(self, step=0.5):
        self.t = 0.0
        self.step = step

    def __call__(self):
        self.t += self.step
        return self.t


def tiny_spec(**kw):
    variants = [
        Variant("MHA", AttentionConfig(16, 4, 4, 4)),
        Variant("SQA", AttentionConfig(16, 4, 2, 1)),
        Variant("SWA", AttentionConfig(16, 4, 4, 4, mask="sliding", window=3)),
    ]
    return BenchSpec(variants=variants, **{"seq_lens": [4, 9], "repeats": 3, **kw})


class TestSpec:
    def test_repeats_minimum(self):
        with pytest.raises(ConfigError, match="repeats"):
            tiny_spec(repeats=2)

    def test_shared_geometry(self):
        with pytest.raises(ConfigError, match="d_model and H"):
            BenchSpec([Variant("a", AttentionConfig(16, 4, 4, 4)), Variant("b", AttentionConfig(32, 4, 4, 4))])

    def test_unique_names(self):
        c = AttentionConfig(16, 4, 4, 4)
        with pytest.raises(ConfigError, match="unique"):
            BenchSpec([Variant("a", c), Variant("a", c)])

    def test_json_round_trip(self):
        s = tiny_spec(precision="f64", seed=3)
        assert BenchSpec.from_dict(json.loads(json.dumps(s.to_dict()))) == s

    def test_bare_config_list(self):
        text = json.dumps({"variants": [{"d_model": 16, "H": 4, "H_q": 2, "H_kv": 2}], "seq_lens": [8]})
        s = BenchSpec.from_json(text)
        assert s.variants[0].name == "sSQA"

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            BenchSpec.from_dict({"variants": [{"d_model": 16, "H": 4, "H_q": 4, "H_kv": 4}], "batch": 2})

    def test_default_baseline_is_unmasked_mha(self):
        assert tiny_spec().baseline_name == "MHA"
        assert default_spec().baseline_name == "MHA"

    def test_default_sweep(self):
        s = default_spec()
        assert s.seq_lens == [512, 1024, 2048, 4096, 8192]
        assert s.precision == "f32"
        assert {v.config.d_model for v in s.variants} == {256}
        assert {v.config.H for v in s.variants} == {16}


class TestRunBench:
    def test_records_sorted_and_complete(self):
        recs = run_bench(tiny_spec(), clock=FakeClock())
        assert [(r.N, r.variant) for r in recs] == sorted(itertools.product([4, 9], ["MHA", "SQA", "SWA"]))

    def test_statistics_with_fake_clock(self):
        recs = run_bench(tiny_spec(), clock=FakeClock(0.5))
        for r in recs:
            assert r.median_seconds == r.mean_seconds == r.min_seconds == 0.5
            assert r.stddev_seconds == 0.0
            assert r.achieved_speedup_vs_baseline == 1.0

    def test_baseline_speedup_is_one(self):
        for r in run_bench(tiny_spec(), clock=FakeClock()):
            if r.variant == "MHA":
                assert r.achieved_speedup_vs_baseline == 1.0

    def test_record_invariants_real_clock(self):
        for r in run_bench(tiny_spec()):
            assert r.min_seconds <= r.median_seconds <= r.mean_seconds + 3 * r.stddev_seconds

    def test_budget_skip(self):
        recs = run_bench(tiny_spec(memory_budget_bytes=1), clock=FakeClock())
        assert all(r.median_seconds is None and "budget" in r.skip_reason for r in recs)

    def test_partial_skip_keeps_sweep_going(self):
        spec = BenchSpec(
            [Variant("MHA", AttentionConfig(16, 4, 4, 4))],
            seq_lens=[4, 4000],
            repeats=3,
            memory_budget_bytes=200_000,
        )
        recs = run_bench(spec, clock=FakeClock())
        assert recs[0].median_seconds is not None and recs[1].skip_reason

    def test_progress_callback(self):
        seen = []
        run_bench(tiny_spec(), clock=FakeClock(), progress=seen.append)
        assert len(seen) == 6

    def test_thread_env_override(self, monkeypatch):
        monkeypatch.setenv(tensor.THREADS_ENV, "3")
        assert run_metadata(tiny_spec(threads=1))["threads"] == "3"


class TestCSV:
    def test_header(self):
        text = emit_csv(run_bench(tiny_spec(), clock=FakeClock()))
        body = [ln for ln in text.splitlines() if not ln.startswith("#")]
        assert body[0] == ",".join(CSV_HEADER)

    def test_round_trip(self):
        spec = tiny_spec()
        recs = run_bench(spec)
        meta = run_metadata(spec)
        back, meta2 = parse_csv(emit_csv(recs, meta))
        assert back == recs
        assert meta2 == meta

    def test_round_trip_with_skips(self):
        recs = run_bench(tiny_spec(memory_budget_bytes=1), clock=FakeClock())
        back, _ = parse_csv(emit_csv(recs))
        assert back == recs

    @given(st.lists(st.floats(1e-9, 1e3, allow_nan=False), min_size=4, max_size=4))
    def test_float_repr_exact(self, vals):
        cfg = AttentionConfig(8, 2, 2, 2)
        r = BenchRecord("x,y", "MHA", cfg, 7, *vals, 123, 1.0)
        assert parse_csv(emit_csv([r]))[0] == [r]

    def test_bad_header(self):
        with pytest.raises(ValueError, match="header"):
            parse_csv("a,b\n")


class TestSpeedupTable:
    def test_single_cell(self):
        r = BenchRecord("MHA", "MHA", AttentionConfig(8, 2, 2, 2), 16, 0.2, 0.2, 0.0, 0.2, 1, 1.0)
        t = speedup_table([r], "MHA")
        assert t.columns == ["MHA"] and t.ns == [16]
        assert t.ratios[(16, "MHA")] == 1.0

    def test_columns_fastest_first(self):
        cfg = AttentionConfig(8, 2, 2, 2)
        times = {"MHA": 3.0, "A": 1.0, "B": 2.0}
        recs = [BenchRecord(k, "MHA", cfg, 10, v, v, 0.0, v, 1, None) for k, v in times.items()]
        t = speedup_table(recs, "MHA")
        assert t.columns == ["A", "B", "MHA"]
        assert t.ratios[(10, "A")] == 3.0
        assert "speedup vs MHA" in t.format()
        assert t.to_csv().splitlines()[0] == "N,A_s,B_s,MHA_s,A_speedup,B_speedup,MHA_speedup"

    def test_missing_baseline_names_hole(self):
        recs = run_bench(tiny_spec(), clock=FakeClock())
        recs = [r for r in recs if not (r.variant == "MHA" and r.N == 9)]
        with pytest.raises(ValueError, match="N=9"):
            speedup_table(recs, "MHA")

    def test_skipped_cells_render(self):
        cfg = AttentionConfig(8, 2, 2, 2)
        recs = [
            BenchRecord("MHA", "MHA", cfg, 10, 1.0, 1.0, 0.0, 1.0, 1, 1.0),
            BenchRecord("B", "MHA", cfg, 10, None, None, None, None, 1, None, "too big"),
        ]
        t = speedup_table(recs, "MHA")
        assert t.columns == ["MHA", "B"]
        assert "skip" in t.format()
