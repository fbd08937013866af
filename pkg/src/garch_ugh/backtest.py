"""VaR backtesting: hit sequences, coverage tests and the two protocols.

In-sample
    One filter is fitted to the whole testing window; the VaR at each ``t``
    is ``mu_t + sigma_t q(Z)`` with the window's fitted dynamics and one
    residual-quantile estimate. GARCH-UGH is run with the estimated and with
    the fixed ``rho = -1`` second-order parameter and the variant whose
    violation count is closer to the expected count is retained.

Out-of-sample
    Each target ``t`` in the testing window is forecast from a fresh fit to
    the preceding ``estimation_window`` returns.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import xlogy

from . import evt
from ._special import chi2_sf
from .garch import fit_qmle
from .var_engine import Method, VaRForecast, forecast_window, k_from_fraction

__all__ = [
    "chi2_sf",
    "HitSequence",
    "CoverageTest",
    "BacktestReport",
    "BacktestConfig",
    "BacktestError",
    "hit_sequence",
    "kupiec",
    "christoffersen",
    "binomial_band",
    "run_in_sample",
    "run_out_of_sample",
    "select_rho_variant",
    "write_reports_csv",
    "read_reports_csv",
    "write_reports_json",
]

log = logging.getLogger(__name__)

DEFAULT_TAUS = (0.99, 0.995, 0.999)
DEFAULT_K_FRACTIONS = (0.05, 0.10, 0.15, 0.20, 0.25)


class BacktestError(RuntimeError):
    """A forecast window failed during a strict backtest run."""


@dataclass(frozen=True)
class HitSequence:
    hits: np.ndarray
    T: int
    N: int
    N00: int
    N01: int
    N10: int
    N11: int

    @classmethod
    def from_hits(cls, hits: Iterable[int | bool]) -> "HitSequence":
        h = np.asarray(list(hits) if not isinstance(hits, np.ndarray) else hits).astype(np.int8)
        if h.ndim != 1 or h.size < 1 or np.any((h != 0) & (h != 1)):
            raise ValueError("hits must be a non-empty 0/1 sequence")
        prev, nxt = h[:-1], h[1:]
        return cls(
            hits=h,
            T=int(h.size),
            N=int(h.sum()),
            N00=int(np.sum((prev == 0) & (nxt == 0))),
            N01=int(np.sum((prev == 0) & (nxt == 1))),
            N10=int(np.sum((prev == 1) & (nxt == 0))),
            N11=int(np.sum((prev == 1) & (nxt == 1))),
        )


@dataclass(frozen=True)
class CoverageTest:
    lr_uc: float
    lr_ind: float
    lr_cc: float
    p_uc: float
    p_ind: float
    p_cc: float


@dataclass(frozen=True)
class BacktestReport:
    method: Method
    tau: float
    k_fraction: float
    expected: float
    observed: int
    test: CoverageTest
    forecasts: list[VaRForecast | None]
    hits: HitSequence
    realized: np.ndarray | None = None
    rho_variant: str = "estimated"
    failures: int = 0
    meta: dict = field(default_factory=dict)

    def forecast_values(self) -> np.ndarray:
        return np.array([np.nan if f is None else f.value for f in self.forecasts])

    def row(self) -> dict:
        t = self.test
        return {
            "method": self.method.value, "tau": self.tau, "k_fraction": self.k_fraction,
            "rho_variant": self.rho_variant, "T": self.hits.T,
            "observed": self.observed, "expected": self.expected,
            "lr_uc": t.lr_uc, "p_uc": t.p_uc, "lr_ind": t.lr_ind, "p_ind": t.p_ind,
            "lr_cc": t.lr_cc, "p_cc": t.p_cc, "failures": self.failures,
        }


@dataclass(frozen=True)
class BacktestConfig:
    methods: tuple[Method, ...] = tuple(Method)
    taus: tuple[float, ...] = DEFAULT_TAUS
    k_fractions: tuple[float, ...] = DEFAULT_K_FRACTIONS
    test_window: int = 3000
    estimation_window: int = 1000
    workers: int = 1
    strict: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        object.__setattr__(self, "k_fractions", tuple(float(k) for k in self.k_fractions))
        if not self.methods:
            raise ValueError("at least one method is required")
        if not all(0.9 < t < 1 for t in self.taus):
            raise ValueError("tau levels must lie in (0.9, 1)")
        if not all(0 < k < 0.5 for k in self.k_fractions):
            raise ValueError("k fractions must lie in (0, 0.5)")
        if self.estimation_window < 100:
            raise ValueError("estimation window must be at least 100")
        if self.test_window < 2:
            raise ValueError("testing window must be at least 2")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


# --- statistics ---------------------------------------------------------------

def hit_sequence(realized: np.ndarray, var: np.ndarray) -> HitSequence:
    """Violations ``x_t > VaR_t`` (strict); a missing (NaN) forecast is no hit."""
    realized = np.asarray(realized, dtype=float)
    var = np.asarray(var, dtype=float)
    with np.errstate(invalid="ignore"):
        return HitSequence.from_hits(realized > var)


def _bernoulli_ll(N: int, T: int, p: float) -> float:
    return float(xlogy(N, p) + xlogy(T - N, 1.0 - p))


def kupiec(hits: HitSequence, p: float) -> tuple[float, float]:
    """Unconditional coverage LR statistic and its chi2(1) p-value."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    T, N = hits.T, hits.N
    lr = -2.0 * _bernoulli_ll(N, T, p) + 2.0 * _bernoulli_ll(N, T, N / T)
    lr = max(lr, 0.0)
    return lr, chi2_sf(lr, 1)


def _markov_ll(h: HitSequence) -> float:
    n0 = h.N00 + h.N01
    n1 = h.N10 + h.N11
    # an empty row contributes nothing (0 log 0 = 0)
    ll = 0.0
    if n0:
        ll += xlogy(h.N00, h.N00 / n0) + xlogy(h.N01, h.N01 / n0)
    if n1:
        ll += xlogy(h.N10, h.N10 / n1) + xlogy(h.N11, h.N11 / n1)
    return float(ll)


def christoffersen(hits: HitSequence, p: float) -> CoverageTest:
    """Conditional coverage test against first-order Markov alternatives.

    ``lr_ind`` is defined as ``lr_cc - lr_uc`` so the decomposition holds
    exactly.
    """
    if hits.T < 2:
        raise ValueError("need at least two observations")
    lr_uc, p_uc = kupiec(hits, p)
    lr_cc = -2.0 * _bernoulli_ll(hits.N, hits.T, p) + 2.0 * _markov_ll(hits)
    lr_cc = max(lr_cc, 0.0)
    lr_ind = lr_cc - lr_uc
    return CoverageTest(lr_uc, lr_ind, lr_cc, p_uc, chi2_sf(max(lr_ind, 0.0), 1),
                        chi2_sf(lr_cc, 2))


def binomial_band(T: int, p: float, level: float = 0.95) -> tuple[int, int]:
    """Central ``level`` interval of a Binomial(T, p) violation count."""
    from scipy.stats import binom

    a = (1.0 - level) / 2.0
    return int(binom.ppf(a, T, p)), int(binom.ppf(1.0 - a, T, p))


# --- protocols ---------------------------------------------------------------

def _values(r) -> np.ndarray:
    x = np.asarray(getattr(r, "values", r), dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise ValueError("return series must be finite and one-dimensional")
    return x


def _make_report(method: Method, tau: float, kf: float, forecasts: list,
                 realized: np.ndarray, *, rho_variant: str = "estimated",
                 failures: int = 0, meta: dict | None = None) -> BacktestReport:
    values = np.array([np.nan if f is None else f.value for f in forecasts])
    hits = hit_sequence(realized, values)
    test = christoffersen(hits, 1.0 - tau)
    return BacktestReport(method, tau, kf, round(hits.T * (1.0 - tau), 9), hits.N, test,
                          list(forecasts), hits, realized, rho_variant, failures,
                          dict(meta or {}))


def select_rho_variant(report_est: BacktestReport, report_minus1: BacktestReport,
                       expected: float | None = None) -> BacktestReport:
    """Keep the variant whose violation count is closer to ``expected``.

    Ties keep the estimated-``rho`` variant.
    """
    if (report_est.method, report_est.tau, report_est.k_fraction) != (
            report_minus1.method, report_minus1.tau, report_minus1.k_fraction):
        raise ValueError("reports must share method, tau and k fraction")
    e = report_est.expected if expected is None else expected
    keep_est = abs(report_est.observed - e) <= abs(report_minus1.observed - e)
    chosen = report_est if keep_est else report_minus1
    meta = dict(chosen.meta)
    meta.update(rho_selection="estimated" if keep_est else "minus_one",
                observed_estimated=report_est.observed,
                observed_minus_one=report_minus1.observed)
    return replace(chosen, rho_variant=meta["rho_selection"], meta=meta)


def run_in_sample(r, config: BacktestConfig = BacktestConfig()) -> list[BacktestReport]:
    """In-sample backtest on the last ``config.test_window`` returns."""
    x = _values(r)
    T = config.test_window
    if x.size < T:
        raise ValueError(f"series of length {x.size} is shorter than the testing window {T}")
    offset = x.size - T
    window = x[offset:]
    meta = {"protocol": "in_sample", "fit": "once_on_testing_window",
            "test_start": offset, "test_window": T}
    reports: list[BacktestReport] = []
    targets = range(offset, x.size)

    if Method.GARCH_UGH in config.methods or Method.GARCH_EVT in config.methods:
        fit = fit_qmle(window)
        z = evt.OrderedSample.from_values(fit.residuals)
        rho_z = evt.select_k_rho(z)
        for tau in config.taus:
            p = 1.0 - tau
            for kf in config.k_fractions:
                k = k_from_fraction(kf, z.n, z.m)
                variants: dict[tuple[Method, str], float] = {}
                if Method.GARCH_UGH in config.methods:
                    variants[(Method.GARCH_UGH, "estimated")] = evt.ugh_quantile(z, k, rho_z, p)
                    variants[(Method.GARCH_UGH, "minus_one")] = evt.ugh_quantile(
                        z, k, evt.DEFAULT_RHO, p)
                if Method.GARCH_EVT in config.methods:
                    variants[(Method.GARCH_EVT, "estimated")] = evt.gpd_quantile(
                        evt.gpd_fit(z, k), p, z.n)
                built = {}
                for (method, variant), q in variants.items():
                    rho = None if method is Method.GARCH_EVT else (
                        rho_z.rho if variant == "estimated" else evt.DEFAULT_RHO)
                    fb = rho_z.fallback if variant == "estimated" and rho is not None else False
                    fc = [VaRForecast(t, tau, float(mu + sg * q), method, kf, k, rho, fb,
                                      float(mu), float(sg), float(q))
                          for t, mu, sg in zip(targets, fit.mu, fit.sigma)]
                    built[(method, variant)] = _make_report(
                        method, tau, kf, fc, window, rho_variant=variant, meta=meta)
                if Method.GARCH_UGH in config.methods:
                    reports.append(select_rho_variant(
                        built[(Method.GARCH_UGH, "estimated")],
                        built[(Method.GARCH_UGH, "minus_one")]))
                if Method.GARCH_EVT in config.methods:
                    reports.append(built[(Method.GARCH_EVT, "estimated")])

    if Method.UGH in config.methods:
        xs = evt.OrderedSample.from_values(window)
        rho_x = evt.select_k_rho(xs)
        for tau in config.taus:
            for kf in config.k_fractions:
                k = k_from_fraction(kf, xs.n, xs.m)
                q = evt.ugh_quantile(xs, k, rho_x, 1.0 - tau)
                fc = [VaRForecast(t, tau, q, Method.UGH, kf, k, rho_x.rho, rho_x.fallback)
                      for t in targets]
                reports.append(_make_report(Method.UGH, tau, kf, fc, window, meta=meta))
    return _sorted(reports, config)


def _sorted(reports: list[BacktestReport], config: BacktestConfig) -> list[BacktestReport]:
    order = {m: i for i, m in enumerate(config.methods)}
    return sorted(reports, key=lambda rep: (order[rep.method], -rep.tau, rep.k_fraction))


def _evaluate_window(args) -> tuple[int, dict | None, str | None]:
    x, target, we, taus, kfs, methods = args
    try:
        out = forecast_window(x[target - we:target], taus, kfs, methods, t_index=target)
        return target, out, None
    except Exception as exc:  # reported per window; strict mode re-raises
        return target, None, f"{type(exc).__name__}: {exc}"


def run_out_of_sample(r, config: BacktestConfig = BacktestConfig(),
                      progress=None) -> list[BacktestReport]:
    """Rolling-window backtest over the last ``config.test_window`` returns.

    Windows are independent and may be evaluated by ``config.workers``
    processes; results are always aggregated in time order. With
    ``config.strict`` the first failed window raises :class:`BacktestError`;
    otherwise its forecasts are recorded as missing and counted in
    ``failures``.
    """
    x = _values(r)
    T, we = config.test_window, config.estimation_window
    if x.size < T + we:
        raise ValueError(f"series of length {x.size} is shorter than "
                         f"estimation window + testing window = {we + T}")
    start = x.size - T
    jobs = [(x, t, we, config.taus, config.k_fractions, config.methods)
            for t in range(start, x.size)]

    results: list[tuple[int, dict | None, str | None]] = []
    if config.workers == 1:
        it = map(_evaluate_window, jobs)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=config.workers)
        it = pool.map(_evaluate_window, jobs, chunksize=max(1, T // (8 * config.workers)))
    try:
        for i, res in enumerate(it):
            if res[2] is not None:
                if config.strict:
                    raise BacktestError(
                        f"forecast for index {res[0]} (window {res[0] - we}..{res[0] - 1}) "
                        f"failed: {res[2]}")
                log.warning("window ending before index %d failed: %s", res[0], res[2])
            results.append(res)
            if progress is not None:
                progress(i + 1, T)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)

    failures = sum(1 for _, out, _ in results if out is None)
    realized = x[start:]
    meta = {"protocol": "out_of_sample", "test_start": start, "test_window": T,
            "estimation_window": we}
    reports = []
    for method in config.methods:
        for tau in config.taus:
            for kf in config.k_fractions:
                key = (method, tau, kf, "estimated")
                fc = [None if out is None else out[key] for _, out, _ in results]
                reports.append(_make_report(method, tau, kf, fc, realized,
                                            failures=failures, meta=meta))
    return _sorted(reports, config)


# --- serialization ----------------------------------------------------------

CSV_FIELDS = ["method", "tau", "k_fraction", "rho_variant", "T", "observed", "expected",
              "lr_uc", "p_uc", "lr_ind", "p_ind", "lr_cc", "p_cc", "failures"]
_INT_FIELDS = {"T", "observed", "failures"}
_FLOAT_FIELDS = {"tau", "k_fraction", "expected", "lr_uc", "p_uc", "lr_ind", "p_ind",
                 "lr_cc", "p_cc"}


def write_reports_csv(reports: Sequence[BacktestReport], path: str | os.PathLike) -> None:
    """One row per report; floats written with ``repr`` so they round-trip."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for rep in reports:
            w.writerow({k: repr(v) if isinstance(v, float) else v
                        for k, v in rep.row().items()})


def read_reports_csv(path: str | os.PathLike) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for raw in csv.DictReader(fh):
            row: dict = {}
            for k, v in raw.items():
                if k in _INT_FIELDS:
                    row[k] = int(v)
                elif k in _FLOAT_FIELDS:
                    row[k] = float(v)
                else:
                    row[k] = v
            rows.append(row)
    return rows


def _json_float(v):
    if v is None:
        return None
    v = float(v)
    return v if np.isfinite(v) else None


def write_reports_json(reports: Sequence[BacktestReport], path: str | os.PathLike,
                       dates: Sequence | None = None) -> None:
    """Full reports with forecast paths and violation indices for plotting."""
    payload = []
    for rep in reports:
        d = rep.row()
        d["meta"] = rep.meta
        t_index = [None if f is None else f.t_index for f in rep.forecasts]
        d["t_index"] = t_index
        if dates is not None:
            d["dates"] = [None if t is None else str(dates[t]) for t in t_index]
        d["var"] = [_json_float(v) for v in rep.forecast_values()]
        d["realized"] = [] if rep.realized is None else [float(v) for v in rep.realized]
        d["violations"] = np.flatnonzero(rep.hits.hits).tolist()
        d["rho_used"] = [None if f is None else _json_float(f.rho_used) for f in rep.forecasts]
        d["rho_fallback"] = [None if f is None else bool(f.rho_fallback) for f in rep.forecasts]
        payload.append(d)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
