import datetime as dt

import numpy as np
import pytest

from garch_ugh.garch import GarchParams, simulate, student_t_innovations

TRUE_PARAMS = GarchParams(phi=0.05, kappa0=1e-6, kappa1=0.08, kappa2=0.90)


def pareto_sample(n, gamma, seed):
    u = np.random.default_rng(seed).uniform(size=n)
    return u ** (-gamma)


def burr_sample(n, seed):
    # survival (1 + x)^(-2): gamma = 0.5, second-order parameter -0.5
    u = np.random.default_rng(seed).uniform(size=n)
    return u ** -0.5 - 1.0


def write_price_csv(path, prices, start=dt.date(2001, 1, 2)):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,price\n")
        for i, p in enumerate(prices):
            fh.write(f"{start + dt.timedelta(days=i)},{float(p)!r}\n")
    return path


def prices_from_returns(x, p0=100.0):
    return p0 * np.exp(-np.cumsum(np.r_[0.0, x]))


@pytest.fixture(scope="session")
def heavy_series():
    """4000 AR-GARCH returns with unit-variance Student-t(4) innovations."""
    return simulate(TRUE_PARAMS, 4000, seed=11, innovations=student_t_innovations(4))


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
