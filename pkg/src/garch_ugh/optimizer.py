"""Bounded derivative-free minimization.

Box constraints are removed by a smooth change of variables and the
unconstrained problem is handed to a Nelder-Mead simplex search:

* ``(lo, inf)``  ->  ``x = lo + exp(y)``
* ``(-inf, hi)`` ->  ``x = hi - exp(y)``
* ``(lo, hi)``   ->  ``x = lo + (hi - lo) * expit(y)``
* unbounded      ->  ``x = y``

Bounds are therefore open and can only be approached, never reached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as _scipy_minimize
from scipy.special import expit, logit

__all__ = ["OptimProblem", "OptimResult", "minimize"]

Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class OptimProblem:
    """Objective, per-coordinate bounds and a strictly interior start."""

    objective: Objective
    x0: np.ndarray
    lower: np.ndarray = None  # type: ignore[assignment]
    upper: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        d = x0.size
        lower = np.full(d, -np.inf) if self.lower is None else np.broadcast_to(
            np.asarray(self.lower, dtype=float), (d,)).copy()
        upper = np.full(d, np.inf) if self.upper is None else np.broadcast_to(
            np.asarray(self.upper, dtype=float), (d,)).copy()
        if np.any(lower >= upper):
            raise ValueError("every lower bound must be below its upper bound")
        if not np.all((x0 > lower) & (x0 < upper)):
            raise ValueError("initial point must lie strictly inside the bounds")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dimension(self) -> int:
        return self.x0.size


@dataclass(frozen=True)
class OptimResult:
    argmin: np.ndarray
    value: float
    iterations: int
    converged: bool
    evaluations: int = field(default=0, compare=False)


class _Transform:
    """Elementwise bijection between the box and R^d."""

    def __init__(self, lower: np.ndarray, upper: np.ndarray) -> None:
        self.lower = lower
        self.upper = upper
        lo_f = np.isfinite(lower)
        hi_f = np.isfinite(upper)
        self.two = lo_f & hi_f
        self.low_only = lo_f & ~hi_f
        self.high_only = ~lo_f & hi_f

    def to_box(self, y: np.ndarray) -> np.ndarray:
        x = np.array(y, dtype=float)
        lo, hi = self.lower, self.upper
        m = self.two
        x[m] = lo[m] + (hi[m] - lo[m]) * expit(y[m])
        m = self.low_only
        x[m] = lo[m] + np.exp(y[m])
        m = self.high_only
        x[m] = hi[m] - np.exp(y[m])
        return x

    def from_box(self, x: np.ndarray) -> np.ndarray:
        y = np.array(x, dtype=float)
        lo, hi = self.lower, self.upper
        m = self.two
        y[m] = logit((x[m] - lo[m]) / (hi[m] - lo[m]))
        m = self.low_only
        y[m] = np.log(x[m] - lo[m])
        m = self.high_only
        y[m] = np.log(hi[m] - x[m])
        return y


def minimize(
    problem: OptimProblem,
    tol: float = 1e-10,
    max_iter: int = 5000,
    step: float | Sequence[float] = 0.5,
    restarts: int = 0,
) -> OptimResult:
    """Minimize ``problem.objective`` inside its bounds with Nelder-Mead.

    Parameters
    ----------
    problem : OptimProblem
    tol : float
        Convergence is declared once the spread of objective values across
        the simplex drops below ``tol``.
    max_iter : int
        Iteration cap per simplex run.
    step : float or sequence of float
        Edge length of the initial simplex in the unconstrained coordinates.
    restarts : int
        Number of deterministic restarts from the current best point with a
        fresh simplex; guards against premature collapse.

    Returns
    -------
    OptimResult
        ``value`` never exceeds the objective at the initial point. Non-finite
        objective values met during the search are treated as ``+inf``.
    """
    if tol <= 0 or max_iter <= 0:
        raise ValueError("tol and max_iter must be positive")
    f0 = float(problem.objective(problem.x0))
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the initial point")

    tr = _Transform(problem.lower, problem.upper)
    evaluations = 0

    def wrapped(y: np.ndarray) -> float:
        nonlocal evaluations
        evaluations += 1
        x = tr.to_box(y)
        # transforms can saturate to the bound itself in floating point
        if np.any(x <= problem.lower) or np.any(x >= problem.upper):
            return np.inf
        with np.errstate(all="ignore"):
            v = float(problem.objective(x))
        return v if np.isfinite(v) else np.inf

    d = problem.dimension
    steps = np.broadcast_to(np.asarray(step, dtype=float), (d,))
    y = tr.from_box(problem.x0)
    best_y, best_f = y, f0
    iterations = 0
    converged = False
    for _ in range(restarts + 1):
        simplex = np.vstack([best_y, best_y + np.diag(steps)])
        res = _scipy_minimize(
            wrapped,
            best_y,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "maxiter": max_iter,
                "maxfev": 4 * max_iter,
                "xatol": np.inf,
                "fatol": tol,
                "adaptive": False,
            },
        )
        iterations += int(res.nit)
        converged = bool(res.status == 0)
        if np.isfinite(res.fun) and res.fun <= best_f:
            best_y, best_f = res.x, float(res.fun)

    argmin = tr.to_box(best_y)
    if best_f >= f0:
        argmin, best_f = problem.x0.copy(), f0
    return OptimResult(argmin, best_f, iterations, converged, evaluations)
