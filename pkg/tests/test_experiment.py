from __future__ import annotations

import math
import random
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from orgsim.design_dept import simulate
from orgsim.experiment import (
    InsufficientSamples,
    ReplicationError,
    ReplicationPlan,
    compare_paired,
    replication_seed,
    run_replications,
    summarize,
)
from orgsim.rng import derive_seed
from orgsim.stats import betainc, t_cdf, t_quantile

from conftest import load_scenario


class TestTDistribution:
    @pytest.mark.parametrize("df", [1, 2, 3, 5, 10, 29, 100, 399, 10_000])
    @pytest.mark.parametrize("p", [0.6, 0.9, 0.95, 0.975, 0.995, 0.9995])
    def test_quantile_against_scipy(self, df, p):
        assert t_quantile(p, df) == pytest.approx(stats.t.ppf(p, df), rel=1e-10, abs=1e-10)

    def test_table_value(self):
        assert t_quantile(0.975, 1) == pytest.approx(12.706, abs=1e-3)

    def test_symmetry(self):
        assert t_quantile(0.025, 7) == -t_quantile(0.975, 7)
        assert t_quantile(0.5, 7) == 0.0

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.0, 1.0))
    def test_incomplete_beta_against_scipy(self, a, b, x):
        assert betainc(a * 20, b * 20, x) == pytest.approx(special.betainc(a * 20, b * 20, x), abs=1e-12)

    @given(st.floats(-50, 50), st.integers(1, 500))
    def test_cdf_against_scipy(self, t, df):
        assert t_cdf(t, df) == pytest.approx(stats.t.cdf(t, df), abs=1e-12)

    @pytest.mark.parametrize("t", [6.103515625e-05, -1e-7, 1e-3])
    def test_cdf_near_centre(self, t):
        assert t_cdf(t, 12) == pytest.approx(stats.t.cdf(t, 12), abs=1e-15)

    def test_bad_arguments(self):
        for bad in (0.0, 1.0, -0.1):
            with pytest.raises(ValueError):
                t_quantile(bad, 3)
        with pytest.raises(ValueError):
            t_quantile(0.9, 0)


class TestSummarize:
    def test_constant_samples(self):
        s = summarize([1, 1, 1])
        assert (s.mean, s.sd, s.ci_low, s.ci_high) == (1, 0, 1, 1)

    def test_two_points(self):
        s = summarize([0, 2])
        assert s.mean == 1 and s.sd == pytest.approx(math.sqrt(2))
        assert s.ci_low == pytest.approx(-11.706, abs=1e-3) and s.ci_high == pytest.approx(13.706, abs=1e-3)

    def test_empty(self):
        with pytest.raises(InsufficientSamples):
            summarize([])

    def test_single_sample_is_degenerate(self):
        s = summarize([4.0])
        assert s.degenerate and s.ci_low == s.ci_high == 4.0 and not s.excludes_zero()

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=60), st.sampled_from([0.01, 0.05, 0.1]))
    @settings(max_examples=200)
    def test_matches_direct_computation(self, xs, alpha):
        s = summarize(xs, alpha)
        q = t_quantile(1 - alpha / 2, len(xs) - 1)
        half = q * statistics.stdev(xs) / math.sqrt(len(xs))
        mean = statistics.fmean(xs)
        tol = 1e-12 * max(1.0, abs(mean), half)
        assert s.mean == pytest.approx(mean, abs=tol)
        assert s.ci_low == pytest.approx(mean - half, abs=tol)
        assert s.ci_high == pytest.approx(mean + half, abs=tol)
        assert s.ci_low <= s.mean <= s.ci_high and s.sd >= 0

    def test_width_shrinks_like_root_n(self):
        rng = random.Random(11)
        w100 = summarize([rng.gauss(0, 1) for _ in range(100)]).half_width
        w400 = summarize([rng.gauss(0, 1) for _ in range(400)]).half_width
        assert 0.425 <= w400 / w100 <= 0.575


SMALL = load_scenario("department.json").with_horizon(150)


class TestReplications:
    def test_single_replication_matches_direct_run(self):
        (rec,) = run_replications(SMALL, ReplicationPlan(1, 99))
        assert rec.seed == derive_seed(99, 0)
        assert rec.metrics == simulate(SMALL, derive_seed(99, 0))[1]

    def test_repeatable(self):
        a = run_replications(SMALL, ReplicationPlan(5, 3))
        b = run_replications(SMALL, ReplicationPlan(5, 3))
        assert [r.metrics for r in a] == [r.metrics for r in b]

    def test_parallel_equals_serial(self):
        serial = run_replications(SMALL, ReplicationPlan(4, 3))
        parallel = run_replications(SMALL, ReplicationPlan(4, 3), workers=2)
        assert [(r.index, r.seed, r.metrics) for r in serial] == [(r.index, r.seed, r.metrics) for r in parallel]

    def test_plan_needs_a_replication(self):
        with pytest.raises(ValueError):
            ReplicationPlan(0, 1)

    def test_errors_carry_the_index(self, monkeypatch):
        import orgsim.experiment as ex

        def boom(config, seed, **kw):
            raise RuntimeError("kaput")

        monkeypatch.setattr(ex, "simulate", boom)
        with pytest.raises(ReplicationError) as info:
            run_replications(SMALL, ReplicationPlan(2, 1))
        assert info.value.index == 0 and "kaput" in str(info.value)


class TestComparePaired:
    def test_identical_configs_give_exact_zeros(self):
        res = compare_paired(SMALL, SMALL, ReplicationPlan(4, 8))
        assert all(d == 0.0 for diffs in res.differences.values() for d in diffs)
        assert all(s.mean == 0 and s.ci_low == 0 and s.ci_high == 0 for s in res.stats.values())

    def test_extra_designer_shape(self):
        doc = SMALL.to_dict()
        doc["department"]["teams"][0]["designers"].append("junior")
        from orgsim.config import parse_scenario_dict

        res = compare_paired(SMALL, parse_scenario_dict(doc), ReplicationPlan(3, 8))
        assert {"mean_team_productivity", "total_cost", "on_time_fraction"} <= set(res.stats)
        assert all(s.n == 3 for s in res.stats.values())

    def test_unpaired_seeds(self):
        res = compare_paired(SMALL, SMALL, ReplicationPlan(2, 8, paired=False))
        assert [r.seed for r in res.records_b] == [derive_seed(8, i, "B") for i in range(2)]
        assert [r.seed for r in res.records_a] == [replication_seed(8, i) for i in range(2)]
