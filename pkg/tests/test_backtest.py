import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from garch_ugh._special import chi2_sf
from garch_ugh.backtest import (
    BacktestConfig,
    BacktestError,
    HitSequence,
    binomial_band,
    christoffersen,
    hit_sequence,
    kupiec,
    read_reports_csv,
    run_in_sample,
    run_out_of_sample,
    select_rho_variant,
    write_reports_csv,
    write_reports_json,
)
from garch_ugh.var_engine import Method

hit_lists = st.lists(st.integers(0, 1), min_size=2, max_size=60)


def spaced_hits(T, n_hits):
    h = np.zeros(T, dtype=int)
    h[np.linspace(100, T - 100, n_hits).astype(int)] = 1
    return HitSequence.from_hits(h)


class TestChi2:
    def test_zero(self):
        for df in (1, 2, 5):
            assert chi2_sf(0.0, df) == 1.0

    def test_df2_closed_form(self):
        assert chi2_sf(2 * math.log(2), 2) == pytest.approx(0.5, abs=1e-15)

    def test_df1(self):
        assert chi2_sf(0.3785, 1) == pytest.approx(0.538, abs=1e-3)
        assert chi2_sf(1.7, 1) == pytest.approx(math.erfc(math.sqrt(1.7 / 2)), rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            chi2_sf(-1.0, 1)


class TestHitSequence:
    def test_transitions(self):
        h = HitSequence.from_hits([0, 1, 1, 0, 0, 1])
        assert (h.T, h.N) == (6, 3)
        assert (h.N00, h.N01, h.N10, h.N11) == (1, 2, 1, 1)

    def test_strict_exceedance_and_missing(self):
        h = hit_sequence([1.0, 2.0, 3.0, 5.0], [1.0, 1.5, np.nan, 4.0])
        assert h.hits.tolist() == [0, 1, 0, 1]

    @given(hit_lists)
    def test_transitions_sum(self, hits):
        h = HitSequence.from_hits(hits)
        assert h.N00 + h.N01 + h.N10 + h.N11 == h.T - 1


class TestKupiec:
    def test_perfect_coverage(self):
        lr, p = kupiec(spaced_hits(1000, 10), 0.01)
        assert lr == pytest.approx(0.0, abs=1e-12)
        assert p == pytest.approx(1.0)

    def test_reference_value(self):
        lr, p = kupiec(spaced_hits(3000, 2), 0.001)
        assert lr == pytest.approx(0.3785, abs=1e-4)
        assert p == pytest.approx(0.538, abs=1e-3)

    def test_no_hits(self):
        lr, p = kupiec(HitSequence.from_hits(np.zeros(100, dtype=int)), 0.01)
        assert lr == pytest.approx(-200 * math.log(0.99), rel=1e-12)
        assert lr == pytest.approx(2.0101, abs=1e-4)
        assert p == pytest.approx(0.156, abs=1e-3)

    def test_all_hits(self):
        lr, _ = kupiec(HitSequence.from_hits(np.ones(10, dtype=int)), 0.5)
        assert lr == pytest.approx(-20 * math.log(0.5))

    @settings(max_examples=50)
    @given(hit_lists, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, hits, rnd):
        perm = list(hits)
        rnd.shuffle(perm)
        a = kupiec(HitSequence.from_hits(hits), 0.05)
        b = kupiec(HitSequence.from_hits(perm), 0.05)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


class TestChristoffersen:
    def test_reference_value(self):
        t = christoffersen(spaced_hits(3000, 2), 0.001)
        assert t.p_uc == pytest.approx(0.538, abs=1e-3)
        assert t.p_cc == pytest.approx(0.826, abs=1e-3)

    def test_all_zero(self):
        t = christoffersen(HitSequence.from_hits(np.zeros(500, dtype=int)), 0.01)
        assert t.lr_ind == 0.0
        assert t.lr_cc == t.lr_uc

    def test_order_sensitive(self):
        clustered = HitSequence.from_hits([0] * 40 + [1] * 5 + [0] * 55)
        spread = HitSequence.from_hits(([0] * 19 + [1]) * 5)
        assert kupiec(clustered, 0.05) == kupiec(spread, 0.05)
        assert christoffersen(clustered, 0.05).lr_cc > christoffersen(spread, 0.05).lr_cc

    @given(hit_lists, st.floats(0.001, 0.5))
    def test_decomposition(self, hits, p):
        t = christoffersen(HitSequence.from_hits(hits), p)
        assert t.lr_cc == pytest.approx(t.lr_uc + t.lr_ind, abs=1e-10)
        assert 0 <= t.p_cc <= 1 and 0 <= t.p_ind <= 1

    def test_size(self):
        rng = np.random.default_rng(99)
        passes = sum(
            christoffersen(HitSequence.from_hits(rng.uniform(size=3000) < 0.005), 0.005).p_cc > 0.01
            for _ in range(200))
        assert passes >= 190


class TestSelectRhoVariant:
    def _pair(self, n_est, n_m1):
        from garch_ugh.backtest import _make_report
        from garch_ugh.var_engine import VaRForecast

        fc = [VaRForecast(t, 0.999, 0.5, Method.GARCH_UGH, 0.1, 300, -1.0, False)
              for t in range(3000)]
        make = lambda n, variant: _make_report(Method.GARCH_UGH, 0.999, 0.1, fc,
                                               (np.arange(3000) < n).astype(float),
                                               rho_variant=variant)
        return make(n_est, "estimated"), make(n_m1, "minus_one")

    @pytest.mark.parametrize("n_est,n_m1,keep", [(2, 6, "estimated"), (4, 2, "estimated"),
                                                 (2, 4, "estimated"), (6, 3, "minus_one")])
    def test_rule(self, n_est, n_m1, keep):
        est, m1 = self._pair(n_est, n_m1)
        chosen = select_rho_variant(est, m1)
        assert chosen.rho_variant == keep
        assert chosen.observed == (n_est if keep == "estimated" else n_m1)

    def test_mismatched_reports(self):
        est, m1 = self._pair(1, 1)
        from dataclasses import replace
        with pytest.raises(ValueError):
            select_rho_variant(est, replace(m1, tau=0.99))


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(taus=(0.5,)), dict(k_fractions=(0.6,)),
                                    dict(estimation_window=50), dict(methods=())])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            BacktestConfig(**kw)


@pytest.fixture(scope="module")
def in_sample_reports(heavy_series):
    return run_in_sample(heavy_series, BacktestConfig(test_window=3000))


class TestInSample:
    def test_shape_and_expected(self, in_sample_reports):
        assert len(in_sample_reports) == 45
        r = next(r for r in in_sample_reports if r.tau == 0.999)
        assert r.expected == 3
        assert r.hits.T == 3000

    def test_counts_in_band(self, in_sample_reports):
        for r in in_sample_reports:
            if r.method is Method.GARCH_UGH and r.tau in (0.99, 0.995):
                lo, hi = binomial_band(3000, 1 - r.tau)
                assert lo <= r.observed <= hi, r.row()

    def test_report_invariants(self, in_sample_reports, heavy_series):
        realized = heavy_series[-3000:]
        for r in in_sample_reports:
            assert r.test.lr_cc == pytest.approx(r.test.lr_uc + r.test.lr_ind, abs=1e-10)
            assert r.observed == int(np.sum(realized > r.forecast_values()))
            assert r.hits.N00 + r.hits.N01 + r.hits.N10 + r.hits.N11 == r.hits.T - 1

    def test_ugh_variant_recorded(self, in_sample_reports):
        ugh = [r for r in in_sample_reports if r.method is Method.GARCH_UGH]
        assert all(r.meta["rho_selection"] == r.rho_variant for r in ugh)

    def test_too_short(self):
        with pytest.raises(ValueError):
            run_in_sample(np.ones(10), BacktestConfig(test_window=3000))


class TestOutOfSample:
    def test_forecast_count(self, heavy_series):
        reps = run_out_of_sample(heavy_series, BacktestConfig(
            methods=("ugh",), taus=(0.99,), k_fractions=(0.1,)))
        assert len(reps[0].forecasts) == 3000
        assert reps[0].failures == 0
        assert [f.t_index for f in reps[0].forecasts] == list(range(1000, 4000))

    def test_window_alignment(self, heavy_series):
        from garch_ugh.var_engine import forecast_ugh_unfiltered

        rep = run_out_of_sample(heavy_series, BacktestConfig(
            methods=("ugh",), taus=(0.995,), k_fractions=(0.2,), test_window=5,
            estimation_window=500))[0]
        for f in rep.forecasts:
            ref = forecast_ugh_unfiltered(heavy_series[f.t_index - 500:f.t_index], 0.995, 0.2)
            assert f.value == ref.value

    def test_workers_match_serial(self, heavy_series):
        cfg = dict(methods=("ugh", "garch_ugh"), taus=(0.99,), k_fractions=(0.1,),
                   test_window=12, estimation_window=500)
        a = run_out_of_sample(heavy_series, BacktestConfig(**cfg))
        b = run_out_of_sample(heavy_series, BacktestConfig(workers=2, **cfg))
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.forecast_values(), rb.forecast_values())

    def test_strict_failure(self):
        x = np.r_[np.zeros(300), np.random.default_rng(0).standard_normal(50)]
        cfg = dict(methods=("ugh",), taus=(0.99,), k_fractions=(0.1,), test_window=50,
                   estimation_window=200)
        with pytest.raises(BacktestError, match="index 300"):
            run_out_of_sample(x, BacktestConfig(**cfg))
        rep = run_out_of_sample(x, BacktestConfig(strict=False, **cfg))[0]
        assert rep.failures > 0
        assert rep.forecasts[0] is None

    def test_full_history_window_agrees_with_in_sample(self, heavy_series):
        T, tau = 200, 0.99
        cfg = BacktestConfig(methods=("garch_ugh",), taus=(tau,), k_fractions=(0.1,),
                             test_window=T, estimation_window=heavy_series.size - T)
        oos = run_out_of_sample(heavy_series, cfg)[0]
        ins = run_in_sample(heavy_series, cfg)[0]
        lo, hi = binomial_band(T, 1 - tau)
        assert lo <= oos.observed <= hi and lo <= ins.observed <= hi

    def test_too_short(self, heavy_series):
        with pytest.raises(ValueError):
            run_out_of_sample(heavy_series[:3500], BacktestConfig())


class TestSerialization:
    def test_csv_round_trip(self, in_sample_reports, tmp_path):
        path = tmp_path / "r.csv"
        write_reports_csv(in_sample_reports, path)
        rows = read_reports_csv(path)
        assert rows == [r.row() for r in in_sample_reports]

    def test_json(self, in_sample_reports, tmp_path):
        path = tmp_path / "r.json"
        write_reports_json(in_sample_reports[:2], path)
        data = json.loads(path.read_text())
        assert len(data) == 2
        assert len(data[0]["var"]) == 3000
        assert data[0]["violations"] == np.flatnonzero(in_sample_reports[0].hits.hits).tolist()
