"""Tail estimation on the upper order statistics of a sample.

Contains the Hill estimator and its log-moments, the second-order parameter
estimator built from the ``S_k^(2)`` statistic together with its automatic
choice of ``k``, the bias-corrected Hill and extreme-quantile estimators,
the Weissman estimator, and peaks-over-threshold GPD fitting.

Order statistics are 1-indexed in docstrings: ``Z_{1,n} <= ... <= Z_{n,n}``,
so the threshold ``Z_{n-k,n}`` sits at 0-based position ``n - k - 1``. Every
``k`` is validated against the number ``m`` of strictly positive entries,
because log-excesses need a positive threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import EstimationError
from .optimizer import OptimProblem, minimize

__all__ = [
    "OrderedSample",
    "RhoEstimate",
    "TailEstimate",
    "GpdFit",
    "log_moments",
    "hill",
    "s_statistic",
    "rho_from_s",
    "s2_of_rho",
    "rho_estimate",
    "rho_search_ceiling",
    "select_k_rho",
    "bc_hill",
    "ugh_quantile",
    "weissman_quantile",
    "tail_estimate",
    "resolve_rho",
    "gpd_fit",
    "gpd_quantile",
    "DEFAULT_RHO",
]

DEFAULT_RHO = -1.0


@dataclass(frozen=True)
class OrderedSample:
    sorted: np.ndarray
    n: int
    m: int

    @classmethod
    def from_values(cls, values) -> "OrderedSample":
        z = np.sort(np.asarray(values, dtype=float).ravel())
        if z.size == 0 or not np.all(np.isfinite(z)):
            raise ValueError("sample must be non-empty and finite")
        z.setflags(write=False)
        return cls(z, int(z.size), int(np.count_nonzero(z > 0)))

    def top(self, k: int) -> np.ndarray:
        """``Z_{n,n}, Z_{n-1,n}, ..., Z_{n-k+1,n}`` (descending)."""
        return self.sorted[self.n - k:][::-1]

    def threshold(self, k: int) -> float:
        """``Z_{n-k,n}``."""
        return float(self.sorted[self.n - k - 1])

    def log_excesses(self, k: int) -> np.ndarray:
        _check_k(self, k)
        return np.log(self.top(k)) - math.log(self.threshold(k))


@dataclass(frozen=True)
class RhoEstimate:
    k_rho: int
    rho: float
    fallback: bool


@dataclass(frozen=True)
class TailEstimate:
    k: int
    k_rho: int
    gamma_hill: float
    gamma_bc: float
    rho_hat: float
    rho_fallback_used: bool
    M1: float
    M2: float
    M3: float
    M4: float


@dataclass(frozen=True)
class GpdFit:
    xi: float
    beta: float
    threshold: float
    k: int
    converged: bool


def _check_k(s: OrderedSample, k: int) -> None:
    if not 0 < k < s.n:
        raise ValueError(f"k={k} outside 1..n-1 (n={s.n})")
    if s.threshold(k) <= 0:
        raise EstimationError(
            f"threshold Z_(n-k,n) is not positive for k={k} (m={s.m}); k must be < m")


def log_moments(s: OrderedSample, k: int, alpha: int) -> float:
    """``M_k^(alpha) = mean((log Z_{n-i+1,n} - log Z_{n-k,n})^alpha)``, i = 1..k."""
    return float(np.mean(s.log_excesses(k) ** alpha))


def _moments(s: OrderedSample, k: int) -> tuple[float, float, float, float]:
    e = s.log_excesses(k)
    e2 = e * e
    return (float(e.mean()), float(e2.mean()), float((e2 * e).mean()),
            float((e2 * e2).mean()))


def hill(s: OrderedSample, k: int) -> float:
    return log_moments(s, k, 1)


def s_statistic(M1: float, M2: float, M3: float, M4: float) -> float:
    """``S^(2) = 3/4 (M4 - 24 M1^4)(M2 - 2 M1^2) / (M3 - 6 M1^3)^2``; nan if undefined."""
    den = (M3 - 6.0 * M1 ** 3) ** 2
    if den == 0 or not np.isfinite(den):
        return math.nan
    return 0.75 * (M4 - 24.0 * M1 ** 4) * (M2 - 2.0 * M1 ** 2) / den


def rho_from_s(S: float) -> float | None:
    """Invert ``s^(2)``; ``None`` unless ``2/3 < S < 3/4``.

    Both endpoints are excluded: ``S = 3/4`` makes the formula singular and
    ``S = 2/3`` maps to ``rho = 0``, which the bias correction cannot use.
    """
    if not (2.0 / 3.0 < S < 0.75):
        return None
    return (-4.0 + 6.0 * S + math.sqrt(3.0 * S - 2.0)) / (4.0 * S - 3.0)


def s2_of_rho(rho: float) -> float:
    """Population counterpart ``s^(2)(rho)`` of the ``S^(2)`` statistic."""
    a = 2
    r1 = 1.0 - rho
    num = rho ** 2 * (1.0 - r1 ** (2 * a) - 2 * a * rho * r1 ** (2 * a - 1))
    den = (1.0 - r1 ** (a + 1) - (a + 1) * rho * r1 ** a) ** 2
    return num / den


def rho_estimate(s: OrderedSample, k: int) -> float | None:
    """Second-order parameter estimate at ``k``, or ``None`` if it does not exist."""
    S = s_statistic(*_moments(s, k))
    return None if math.isnan(S) else rho_from_s(S)


def rho_search_ceiling(m: int) -> int:
    """``floor(min(m - 1, 2m / log log m))``."""
    if m < 3:
        raise ValueError("need at least 3 positive observations")
    return int(min(m - 1, math.floor(2 * m / math.log(math.log(m)))))


def _moment_paths(s: OrderedSample, kmax: int) -> np.ndarray:
    """Rows ``M^(1..4)`` for every ``k = 1..kmax`` from cumulative power sums.

    Logs are shifted by the sample maximum so the binomial expansion of
    ``(L_i - L_{k+1})^alpha`` works on nonpositive, well-scaled terms.
    """
    d = np.log(s.top(kmax + 1))
    d -= d[0]
    k = np.arange(1, kmax + 1, dtype=float)
    c = d[1:]  # threshold log for each k
    head = d[:-1]
    S1 = np.cumsum(head)
    S2 = np.cumsum(head ** 2)
    S3 = np.cumsum(head ** 3)
    S4 = np.cumsum(head ** 4)
    M1 = S1 / k - c
    M2 = (S2 - 2 * c * S1) / k + c ** 2
    M3 = (S3 - 3 * c * S2 + 3 * c ** 2 * S1) / k - c ** 3
    M4 = (S4 - 4 * c * S3 + 6 * c ** 2 * S2 - 4 * c ** 3 * S1) / k + c ** 4
    return np.vstack([M1, M2, M3, M4])


def select_k_rho(s: OrderedSample) -> RhoEstimate:
    """Largest ``k`` below the search ceiling at which ``rho`` exists.

    Falls back to ``(0, -1, fallback=True)`` when no such ``k`` exists.
    """
    kmax = rho_search_ceiling(s.m)
    M1, M2, M3, M4 = _moment_paths(s, kmax)
    with np.errstate(divide="ignore", invalid="ignore"):
        S = 0.75 * (M4 - 24 * M1 ** 4) * (M2 - 2 * M1 ** 2) / (M3 - 6 * M1 ** 3) ** 2
    ok = np.flatnonzero((S > 2.0 / 3.0) & (S < 0.75))
    if ok.size == 0:
        return RhoEstimate(0, DEFAULT_RHO, True)
    k = int(ok[-1]) + 1
    return RhoEstimate(k, rho_from_s(float(S[k - 1])), False)


def _bc_correction(gamma_h: float, M2: float, rho: float) -> float:
    if gamma_h == 0:
        raise EstimationError("Hill estimate is zero; tail is degenerate")
    if not rho < 0:
        raise ValueError("second-order parameter must be negative")
    return (M2 - 2.0 * gamma_h ** 2) / (2.0 * gamma_h * rho / (1.0 - rho))


def bc_hill(s: OrderedSample, k: int, rho_hat: float) -> float:
    """Bias-corrected Hill estimate ``gamma_H - (M2 - 2 gamma_H^2) / (2 gamma_H rho / (1 - rho))``."""
    e = s.log_excesses(k)
    gamma_h = float(e.mean())
    return gamma_h - _bc_correction(gamma_h, float(np.mean(e * e)), rho_hat)


def resolve_rho(s: OrderedSample, rho: RhoEstimate | float | None) -> RhoEstimate:
    if rho is None:
        return select_k_rho(s)
    if isinstance(rho, RhoEstimate):
        return rho
    return RhoEstimate(0, float(rho), False)


def tail_estimate(s: OrderedSample, k: int,
                  rho: RhoEstimate | float | None = None) -> TailEstimate:
    """All tail quantities at ``k``.

    ``rho`` may be a precomputed :class:`RhoEstimate`, a fixed value (e.g.
    ``-1``), or ``None`` to run :func:`select_k_rho`.
    """
    r = resolve_rho(s, rho)
    M1, M2, M3, M4 = _moments(s, k)
    gamma_bc = M1 - _bc_correction(M1, M2, r.rho)
    return TailEstimate(k, r.k_rho, M1, gamma_bc, r.rho, r.fallback, M1, M2, M3, M4)


def ugh_quantile(s: OrderedSample, k: int, rho: RhoEstimate | float | None,
                 p: float, n_eff: int | None = None) -> float:
    """Bias-corrected extreme quantile ``q_{1-p}``.

    ::

        q = Z_{n-k,n} (k/(n p))^gamma_bc
              * (1 - (M2 - 2 gamma_H^2)(1 - rho)^2 / (2 gamma_H rho^2)
                   * (1 - (k/(n p))^rho))

    ``n_eff`` defaults to the sample size.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    n = s.n if n_eff is None else n_eff
    te = tail_estimate(s, k, rho)
    ratio = k / (n * p)
    g, r = te.gamma_hill, te.rho_hat
    bracket = 1.0 - (te.M2 - 2.0 * g * g) * (1.0 - r) ** 2 / (2.0 * g * r * r) * (1.0 - ratio ** r)
    return s.threshold(k) * ratio ** te.gamma_bc * bracket


def weissman_quantile(s: OrderedSample, k: int, gamma: float, p: float,
                      n_eff: int | None = None) -> float:
    n = s.n if n_eff is None else n_eff
    u = s.threshold(k)
    if u <= 0:
        raise EstimationError("threshold must be positive")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return (k / (n * p)) ** gamma * u


# --- peaks over threshold --------------------------------------------------

_XI_ZERO = 1e-8


def _gpd_nll(theta: np.ndarray, y: np.ndarray) -> float:
    xi, beta = theta
    if beta <= 0:
        return math.inf
    if abs(xi) < _XI_ZERO:
        return y.size * math.log(beta) + float(y.sum()) / beta
    t = 1.0 + xi * y / beta
    if np.any(t <= 0):
        return math.inf
    return y.size * math.log(beta) + (1.0 + 1.0 / xi) * float(np.log(t).sum())


def gpd_fit(s: OrderedSample, k: int, tol: float = 1e-10, max_iter: int = 2000) -> GpdFit:
    """Maximum-likelihood GPD fit to the excesses over ``u = Z_{n-k,n}``.

    Starts from ``xi = 0.1`` and ``beta = mean excess * 0.9``. Excesses with
    no spread give a non-converged fit with ``xi = 0``.
    """
    if not 0 < k < s.n:
        raise ValueError(f"k={k} outside 1..n-1 (n={s.n})")
    u = s.threshold(k)
    y = s.top(k) - u
    spread = float(np.ptp(y))
    mean_excess = float(y.mean())
    if spread <= 1e-12 * max(1.0, abs(u)) or mean_excess <= 0:
        return GpdFit(0.0, max(mean_excess, np.finfo(float).tiny), u, k, False)

    xi0 = 0.1
    problem = OptimProblem(
        objective=lambda th: _gpd_nll(th, y),
        x0=np.array([xi0, mean_excess * (1.0 - xi0)]),
        lower=np.array([-np.inf, 0.0]),
        upper=np.array([np.inf, np.inf]),
    )
    res = minimize(problem, tol=tol, max_iter=max_iter, step=[0.1, 0.5], restarts=1)
    xi, beta = res.argmin
    return GpdFit(float(xi), float(beta), u, k, res.converged)


def gpd_quantile(fit: GpdFit, p: float, n_eff: int) -> float:
    """POT quantile ``u + beta/xi ((n p / k)^(-xi) - 1)``; ``u + beta log(k/(n p))`` at ``xi = 0``."""
    if not 0 < p <= fit.k / n_eff:
        raise ValueError("p must lie in (0, k/n]")
    ratio = fit.k / (n_eff * p)
    if abs(fit.xi) < _XI_ZERO:
        return fit.threshold + fit.beta * math.log(ratio)
    return fit.threshold + fit.beta / fit.xi * (ratio ** fit.xi - 1.0)
