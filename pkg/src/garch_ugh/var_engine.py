"""One-step-ahead conditional VaR for the three methods.

Filtered methods use the location-scale decomposition
``VaR_tau(X_{t+1} | F_t) = mu_{t+1} + sigma_{t+1} q_tau(Z)``; the unfiltered
method estimates ``q_tau(X)`` directly from the raw window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import evt
from .exceptions import EstimationError
from .garch import MIN_WINDOW, GarchFit, fit_qmle

__all__ = [
    "Method",
    "VaRForecast",
    "k_from_fraction",
    "forecast_garch_ugh",
    "forecast_garch_evt",
    "forecast_ugh_unfiltered",
    "forecast_window",
    "residual_quantile",
]


class Method(str, enum.Enum):
    GARCH_UGH = "garch_ugh"
    GARCH_EVT = "garch_evt"
    UGH = "ugh"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class VaRForecast:
    t_index: int
    tau: float
    value: float
    method: Method
    k_fraction: float
    k: int
    rho_used: float | None
    rho_fallback: bool
    mu: float | None = None
    sigma: float | None = None
    z_quantile: float | None = None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["method"] = self.method.value
        return d


def k_from_fraction(k_fraction: float, n: int, m: int) -> int:
    """``round(k_fraction * n)``, capped at ``m - 1`` and floored at 1."""
    if not 0 < k_fraction < 1:
        raise ValueError("k_fraction must lie in (0, 1)")
    if m < 2:
        raise EstimationError(f"only {m} positive observations in the window")
    return max(1, min(int(round(k_fraction * n)), m - 1))


def _check_tau(tau: float) -> float:
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    return 1.0 - tau


def residual_quantile(sample: evt.OrderedSample, method: Method, tau: float,
                      k: int, rho: evt.RhoEstimate | float | None = None) -> float:
    """Tail quantile ``q_tau`` of an ordered sample by the UGH or POT route."""
    p = _check_tau(tau)
    if method is Method.GARCH_EVT:
        return evt.gpd_quantile(evt.gpd_fit(sample, k), p, sample.n)
    return evt.ugh_quantile(sample, k, rho, p, sample.n)


def _filtered(method: Method, fit: GarchFit, tau: float, k_fraction: float,
              rho: evt.RhoEstimate | float | None, t_index: int,
              sample: evt.OrderedSample | None = None,
              gpd_cache: dict | None = None) -> VaRForecast:
    sample = sample or evt.OrderedSample.from_values(fit.residuals)
    k = k_from_fraction(k_fraction, sample.n, sample.m)
    p = _check_tau(tau)
    rho_used: float | None = None
    fallback = False
    if method is Method.GARCH_EVT:
        g = gpd_cache.get(k) if gpd_cache is not None else None
        if g is None:
            g = evt.gpd_fit(sample, k)
            if gpd_cache is not None:
                gpd_cache[k] = g
        q = evt.gpd_quantile(g, p, sample.n)
    else:
        r = evt.resolve_rho(sample, rho)
        rho_used, fallback = r.rho, r.fallback
        q = evt.ugh_quantile(sample, k, r, p, sample.n)
    return VaRForecast(t_index, tau, fit.mu_next + fit.sigma_next * q, method,
                       k_fraction, k, rho_used, fallback, fit.mu_next,
                       fit.sigma_next, q)


def _prepare(window) -> np.ndarray:
    x = np.asarray(getattr(window, "values", window), dtype=float)
    if x.ndim != 1 or x.size < MIN_WINDOW:
        raise ValueError(f"window must hold at least {MIN_WINDOW} returns")
    return x


def forecast_garch_ugh(window, tau: float, k_fraction: float,
                       rho_override: float | None = None, *,
                       fit: GarchFit | None = None,
                       t_index: int | None = None) -> VaRForecast:
    """GARCH-UGH forecast of ``VaR_tau`` for the return following ``window``.

    ``rho_override`` replaces the estimated second-order parameter (the
    usual alternative is ``-1``). Pass ``fit`` to reuse an existing filter.
    """
    x = _prepare(window)
    fit = fit or fit_qmle(x)
    return _filtered(Method.GARCH_UGH, fit, tau, k_fraction, rho_override,
                     x.size if t_index is None else t_index)


def forecast_garch_evt(window, tau: float, k_fraction: float, *,
                       fit: GarchFit | None = None,
                       t_index: int | None = None) -> VaRForecast:
    """GARCH filter followed by a GPD fit to the residual exceedances."""
    x = _prepare(window)
    fit = fit or fit_qmle(x)
    return _filtered(Method.GARCH_EVT, fit, tau, k_fraction, None,
                     x.size if t_index is None else t_index)


def forecast_ugh_unfiltered(window, tau: float, k_fraction: float,
                            rho_override: float | None = None, *,
                            t_index: int | None = None) -> VaRForecast:
    """Bias-corrected quantile of the raw returns, with no volatility filter."""
    x = _prepare(window)
    sample = evt.OrderedSample.from_values(x)
    k = k_from_fraction(k_fraction, sample.n, sample.m)
    r = evt.resolve_rho(sample, rho_override)
    q = evt.ugh_quantile(sample, k, r, _check_tau(tau), sample.n)
    return VaRForecast(x.size if t_index is None else t_index, tau, q, Method.UGH,
                       k_fraction, k, r.rho, r.fallback)


def forecast_window(
    window,
    taus: Sequence[float],
    k_fractions: Sequence[float],
    methods: Iterable[Method | str] = tuple(Method),
    *,
    t_index: int | None = None,
    rho_variants: bool = False,
) -> dict[tuple, VaRForecast]:
    """Every configured forecast from one window, sharing fits and ``k_rho``.

    Keys are ``(method, tau, k_fraction, variant)`` where ``variant`` is
    ``"estimated"``, or ``"minus_one"`` for the GARCH-UGH run with the
    second-order parameter fixed at ``-1`` (only when ``rho_variants``).
    """
    x = _prepare(window)
    t = x.size if t_index is None else t_index
    methods = [Method(m) for m in methods]
    out: dict[tuple, VaRForecast] = {}

    if Method.GARCH_UGH in methods or Method.GARCH_EVT in methods:
        fit = fit_qmle(x)
        z = evt.OrderedSample.from_values(fit.residuals)
        rho_z = evt.select_k_rho(z) if Method.GARCH_UGH in methods else None
        gpd_cache: dict = {}
        for tau in taus:
            for kf in k_fractions:
                if Method.GARCH_UGH in methods:
                    out[(Method.GARCH_UGH, tau, kf, "estimated")] = _filtered(
                        Method.GARCH_UGH, fit, tau, kf, rho_z, t, z)
                    if rho_variants:
                        out[(Method.GARCH_UGH, tau, kf, "minus_one")] = _filtered(
                            Method.GARCH_UGH, fit, tau, kf, evt.DEFAULT_RHO, t, z)
                if Method.GARCH_EVT in methods:
                    out[(Method.GARCH_EVT, tau, kf, "estimated")] = _filtered(
                        Method.GARCH_EVT, fit, tau, kf, None, t, z, gpd_cache)

    if Method.UGH in methods:
        xs = evt.OrderedSample.from_values(x)
        rho_x = evt.select_k_rho(xs)
        for tau in taus:
            for kf in k_fractions:
                k = k_from_fraction(kf, xs.n, xs.m)
                q = evt.ugh_quantile(xs, k, rho_x, _check_tau(tau), xs.n)
                out[(Method.UGH, tau, kf, "estimated")] = VaRForecast(
                    t, tau, q, Method.UGH, kf, k, rho_x.rho, rho_x.fallback)
    return out
