"""AR(1)-GARCH(1,1) filtering by Gaussian quasi-maximum likelihood.

Model for negative log-returns::

    X_t = mu_t + sigma_t Z_t
    mu_t = phi X_{t-1}
    sigma_t^2 = kappa0 + kappa1 (X_{t-1} - mu_{t-1})^2 + kappa2 sigma_{t-1}^2

No intercept in the mean equation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .exceptions import EstimationError
from .optimizer import OptimProblem, minimize

__all__ = [
    "GarchParams",
    "GarchFit",
    "RecursionOutput",
    "garch_recursion",
    "simulate",
    "fit_qmle",
    "student_t_innovations",
    "MIN_WINDOW",
]

MIN_WINDOW = 100


@dataclass(frozen=True)
class GarchParams:
    phi: float
    kappa0: float
    kappa1: float
    kappa2: float

    def __post_init__(self) -> None:
        if not abs(self.phi) < 1:
            raise ValueError(f"phi must lie in (-1, 1), got {self.phi}")
        if min(self.kappa0, self.kappa1, self.kappa2) <= 0:
            raise ValueError("kappa0, kappa1 and kappa2 must be positive")

    @property
    def stationary(self) -> bool:
        """Sufficient condition kappa1 + kappa2 < 1."""
        return self.kappa1 + self.kappa2 < 1

    @property
    def unconditional_variance(self) -> float:
        if not self.stationary:
            return np.inf
        return self.kappa0 / (1.0 - self.kappa1 - self.kappa2)

    def as_array(self) -> np.ndarray:
        return np.array([self.phi, self.kappa0, self.kappa1, self.kappa2])


@dataclass(frozen=True)
class RecursionOutput:
    mu: np.ndarray
    sigma: np.ndarray
    residuals: np.ndarray
    neg_loglik: float


@dataclass(frozen=True)
class GarchFit:
    """Fitted filter over one window plus its one-step-ahead forecasts."""

    params: GarchParams
    mu: np.ndarray
    sigma: np.ndarray
    residuals: np.ndarray
    mu_next: float
    sigma_next: float
    neg_loglik: float
    converged: bool

    @property
    def stationary(self) -> bool:
        return self.params.stationary

    @property
    def n(self) -> int:
        return self.residuals.size


def _variance_path(eps: np.ndarray, kappa0: float, kappa1: float, kappa2: float,
                   eps0_sq: float, sigma0_sq: float) -> np.ndarray:
    # sigma2[t] = kappa0 + kappa1 eps[t-1]^2 + kappa2 sigma2[t-1], eps[-1]^2 = eps0_sq
    drive = np.empty_like(eps)
    drive[0] = kappa0 + kappa1 * eps0_sq
    drive[1:] = kappa0 + kappa1 * eps[:-1] ** 2
    zi = np.array([kappa2 * sigma0_sq])
    out, _ = lfilter([1.0], [1.0, -kappa2], drive, zi=zi)
    return out


def _neg_loglik(x: np.ndarray, x_prev: float, theta: np.ndarray,
                eps0_sq: float, sigma0_sq: float) -> float:
    phi, k0, k1, k2 = theta
    mu = np.empty_like(x)
    mu[0] = phi * x_prev
    mu[1:] = phi * x[:-1]
    eps = x - mu
    s2 = _variance_path(eps, k0, k1, k2, eps0_sq, sigma0_sq)
    if not np.all(s2 > 0):
        return np.inf
    return float(np.sum(np.log(s2) + eps * eps / s2))


def garch_recursion(
    x: np.ndarray,
    params: GarchParams,
    init: tuple[float, float],
    x_prev: float = 0.0,
) -> RecursionOutput:
    """Run the AR(1)-GARCH(1,1) filter over a window.

    Parameters
    ----------
    x : array_like
        Return window ``X_1, ..., X_n``.
    params : GarchParams
    init : (eps0_sq, sigma0_sq)
        Squared innovation and conditional variance just before the window.
    x_prev : float
        Return preceding the window, feeding ``mu_1 = phi * x_prev``.

    Returns
    -------
    RecursionOutput
        ``neg_loglik`` is ``sum(log sigma_t^2 + eps_t^2 / sigma_t^2)``, the
        Gaussian criterion without its additive constant and factor 1/2.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("return window must be one-dimensional with length >= 2")
    eps0_sq, sigma0_sq = init
    if eps0_sq < 0 or sigma0_sq < 0:
        raise ValueError("initial values must be nonnegative")

    mu = np.empty_like(x)
    mu[0] = params.phi * x_prev
    mu[1:] = params.phi * x[:-1]
    eps = x - mu
    with np.errstate(over="ignore", invalid="ignore"):
        s2 = _variance_path(eps, params.kappa0, params.kappa1, params.kappa2,
                            eps0_sq, sigma0_sq)
        sigma = np.sqrt(s2)
        z = eps / sigma
        nll = float(np.sum(np.log(s2) + z * z))
    if not (np.all(np.isfinite(sigma)) and np.all(sigma > 0) and np.isfinite(nll)):
        raise EstimationError("non-finite value in GARCH recursion")
    return RecursionOutput(mu, sigma, z, nll)


def student_t_innovations(df: float) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Sampler of unit-variance Student-t innovations (tail index 1/df)."""
    if df <= 2:
        raise ValueError("df must exceed 2 for unit variance")
    scale = np.sqrt((df - 2.0) / df)

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_t(df, size=size) * scale

    return draw


def simulate(
    params: GarchParams,
    n: int,
    burn_in: int = 500,
    seed: int | np.random.Generator | None = None,
    innovations: Callable[[np.random.Generator, int], np.ndarray] | None = None,
    return_state: bool = False,
):
    """Simulate a stationary AR(1)-GARCH(1,1) path.

    The recursion starts from ``X = 0``, ``eps = 0`` and the unconditional
    variance; the first ``burn_in`` values are discarded. Innovations are
    i.i.d. standard normal unless a sampler ``innovations(rng, size)`` is
    supplied.

    With ``return_state=True`` a dict is returned holding ``x``, ``mu``,
    ``sigma``, ``z`` and the pre-sample state (``x_prev``, ``eps0_sq``,
    ``sigma0_sq``) needed to replay the path with :func:`garch_recursion`.
    """
    if not params.stationary:
        raise ValueError("simulation requires kappa1 + kappa2 < 1")
    if n <= 0 or burn_in <= 0:
        raise ValueError("n and burn_in must be positive")
    rng = np.random.default_rng(seed)
    total = n + burn_in
    draw = innovations or (lambda g, size: g.standard_normal(size))
    z = np.asarray(draw(rng, total), dtype=float)

    phi, k0, k1, k2 = params.as_array()
    x = np.empty(total)
    mu = np.empty(total)
    s2 = np.empty(total)
    x_prev, eps_prev, s2_prev = 0.0, 0.0, params.unconditional_variance
    for t in range(total):
        mu[t] = phi * x_prev
        s2[t] = k0 + k1 * eps_prev * eps_prev + k2 * s2_prev
        x[t] = mu[t] + np.sqrt(s2[t]) * z[t]
        eps_prev = x[t] - mu[t]
        x_prev, s2_prev = x[t], s2[t]

    keep = slice(burn_in, total)
    if not return_state:
        return x[keep].copy()
    b = burn_in
    return {
        "x": x[keep].copy(),
        "mu": mu[keep].copy(),
        "sigma": np.sqrt(s2[keep]),
        "z": z[keep].copy(),
        "x_prev": float(x[b - 1]),
        "eps0_sq": float((x[b - 1] - mu[b - 1]) ** 2),
        "sigma0_sq": float(s2[b - 1]),
    }


def fit_qmle(x: np.ndarray, tol: float = 1e-9, max_iter: int = 4000) -> GarchFit:
    """Fit AR(1)-GARCH(1,1) to a return window by Gaussian QMLE.

    The pre-window state is fixed at ``eps^2 = 0`` and ``sigma^2`` equal to
    the sample variance of the window; the return before the window is taken
    as 0. The search starts at ``phi = 0, kappa0 = 0.05 var(x),
    kappa1 = 0.05, kappa2 = 0.90`` under the bounds ``|phi| < 1`` and
    ``kappa_i > 0``. Stationarity is not imposed; check ``fit.stationary``.

    Non-convergence of the optimizer is reported through ``converged`` and
    the best point found is still returned.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < MIN_WINDOW:
        raise ValueError(f"QMLE needs a window of at least {MIN_WINDOW} returns")
    if not np.all(np.isfinite(x)):
        raise ValueError("return window contains non-finite values")
    var = float(np.var(x))
    if not var > 0:
        raise EstimationError("degenerate window: zero sample variance")

    init = (0.0, var)
    problem = OptimProblem(
        objective=lambda th: _neg_loglik(x, 0.0, th, 0.0, var),
        x0=np.array([0.0, 0.05 * var, 0.05, 0.90]),
        lower=np.array([-1.0, 0.0, 0.0, 0.0]),
        upper=np.array([1.0, np.inf, np.inf, np.inf]),
    )
    res = minimize(problem, tol=tol, max_iter=max_iter, restarts=1)
    phi, k0, k1, k2 = res.argmin
    params = GarchParams(float(phi), float(k0), float(k1), float(k2))
    if not params.stationary:
        warnings.warn("fitted GARCH parameters violate kappa1 + kappa2 < 1",
                      RuntimeWarning, stacklevel=2)

    rec = garch_recursion(x, params, init)
    eps_last = x[-1] - rec.mu[-1]
    mu_next = params.phi * x[-1]
    sigma_next = float(np.sqrt(k0 + k1 * eps_last ** 2 + k2 * rec.sigma[-1] ** 2))
    return GarchFit(
        params=params,
        mu=rec.mu,
        sigma=rec.sigma,
        residuals=rec.residuals,
        mu_next=float(mu_next),
        sigma_next=sigma_next,
        neg_loglik=rec.neg_loglik,
        converged=res.converged,
    )
