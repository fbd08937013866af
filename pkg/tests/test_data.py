import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from garch_ugh.data import (
    PriceSeries,
    ReturnSeries,
    describe,
    load_prices,
    ljung_box,
    neg_log_returns,
    write_stats_csv,
)
from garch_ugh.exceptions import DataError

from conftest import write_price_csv

finite = st.floats(-1e3, 1e3, allow_nan=False)


class TestLoadPrices:
    def test_two_rows(self):
        ps = load_prices(b"date,price\n2020-01-01,100\n2020-01-02,110\n")
        assert len(ps) == 2
        assert ps.prices.tolist() == [100.0, 110.0]

    def test_path_and_text_stream(self, tmp_path):
        path = write_price_csv(tmp_path / "p.csv", [1.0, 2.0, 3.0])
        assert len(load_prices(path)) == 3
        assert len(load_prices(io.StringIO(path.read_text()))) == 3

    def test_zero_price(self):
        with pytest.raises(DataError, match="non-positive"):
            load_prices(b"date,price\n2020-01-01,100\n2020-01-02,0\n")

    def test_malformed_row_reports_line(self):
        with pytest.raises(DataError, match=":3:"):
            load_prices(b"date,price\n2020-01-01,100\n2020-01-02,abc\n")

    @pytest.mark.parametrize("second,kind", [("2020-01-01", "duplicate"),
                                             ("2019-12-31", "unsorted")])
    def test_date_order(self, second, kind):
        with pytest.raises(DataError, match=kind):
            load_prices(f"date,price\n2020-01-01,100\n{second},101\n".encode())

    def test_missing_header(self):
        with pytest.raises(DataError, match="header"):
            load_prices(b"2020-01-01,100\n2020-01-02,110\n")

    def test_4000_rows(self, tmp_path):
        path = write_price_csv(tmp_path / "p.csv", np.linspace(100, 200, 4000))
        assert len(load_prices(path)) == 4000


class TestNegLogReturns:
    def test_constant_prices(self):
        ps = load_prices(b"date,price\n2020-01-01,5\n2020-01-02,5\n2020-01-03,5\n")
        assert neg_log_returns(ps).values.tolist() == [0.0, 0.0]

    def test_gain_is_negative(self):
        ps = load_prices(b"date,price\n2020-01-01,100\n2020-01-02,110\n")
        assert neg_log_returns(ps).values[0] == pytest.approx(-0.0953101798, abs=1e-9)

    def test_halving_is_loss(self):
        ps = load_prices(b"date,price\n2020-01-01,100\n2020-01-02,50\n")
        r = neg_log_returns(ps)
        assert r.values[0] == pytest.approx(math.log(2))
        assert r.dates == ps.dates[1:]

    @given(st.lists(st.floats(0.1, 1e4), min_size=2, max_size=30),
           st.floats(1e-3, 1e3))
    def test_scale_invariant(self, prices, c):
        import datetime as dt
        dates = tuple(dt.date(2000, 1, 1) + dt.timedelta(days=i) for i in range(len(prices)))
        a = neg_log_returns(PriceSeries(dates, np.array(prices)))
        b = neg_log_returns(PriceSeries(dates, c * np.array(prices)))
        np.testing.assert_allclose(a.values, b.values, atol=1e-12)


class TestDescribe:
    def test_gaussian_jb_not_rejected(self):
        x = np.random.default_rng(2024).standard_normal(4000)
        st_ = describe(ReturnSeries.from_values(x))
        assert st_.jarque_bera_p > 0.01
        assert st_.kurtosis == pytest.approx(3.0, abs=0.3)
        assert st_.sd == pytest.approx(np.std(x, ddof=1))

    def test_jb_formula(self):
        x = np.random.default_rng(5).standard_t(5, size=500)
        st_ = describe(x)
        m = x - x.mean()
        s = np.mean(m ** 3) / np.mean(m ** 2) ** 1.5
        k = np.mean(m ** 4) / np.mean(m ** 2) ** 2
        assert st_.jarque_bera_stat == pytest.approx(500 * (s * s / 6 + (k - 3) ** 2 / 24))
        assert st_.jarque_bera_p == pytest.approx(math.exp(-st_.jarque_bera_stat / 2))

    def test_single_spike(self):
        x = np.zeros(50)
        x[25] = 1.0
        st_ = describe(x, lb_lags=(1, 5, 10))
        assert all(np.isfinite(q) for _, q, _ in st_.ljung_box)

    def test_zero_variance(self):
        with pytest.raises(DataError):
            describe(np.ones(100))

    def test_too_short(self):
        with pytest.raises(DataError):
            describe(np.arange(5.0), lb_lags=(10,))

    def test_stats_csv(self, tmp_path):
        st_ = describe(np.random.default_rng(0).standard_normal(300))
        write_stats_csv(st_, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        # header + 10 moment/JB rows + 2 per Ljung-Box lag
        assert len(lines) == 1 + 10 + 2 * 3 + 2 * 2

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-5, 5), st.floats(0.01, 100),
           st.booleans())
    def test_jb_affine_invariant(self, seed, a, b, flip):
        x = np.random.default_rng(seed).standard_t(6, size=200)
        b = -b if flip else b
        assert describe(a + b * x).jarque_bera_stat == pytest.approx(
            describe(x).jarque_bera_stat, rel=1e-8, abs=1e-8)


class TestLjungBox:
    def test_matches_direct_sum(self):
        x = np.random.default_rng(1).standard_normal(200)
        n = x.size
        xc = x - x.mean()
        r = [np.sum(xc[j:] * xc[:-j]) / np.sum(xc * xc) for j in (1, 2, 3)]
        q = n * (n + 2) * sum(rj ** 2 / (n - j) for j, rj in zip((1, 2, 3), r))
        assert ljung_box(x, [3])[0][1] == pytest.approx(q, rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(finite, min_size=25, max_size=80).filter(lambda v: np.ptp(v) > 1e-6))
    def test_nondecreasing_in_lag(self, xs):
        qs = [q for _, q, _ in ljung_box(np.array(xs), range(1, 21))]
        assert all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(qs, qs[1:]))
