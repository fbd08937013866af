"""Price ingestion, negative log-returns and descriptive statistics."""

from __future__ import annotations

import csv
import datetime as dt
import io
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence, Union

import numpy as np
from scipy import stats

from ._special import chi2_sf
from .exceptions import DataError

__all__ = [
    "PriceSeries",
    "ReturnSeries",
    "DescriptiveStats",
    "load_prices",
    "neg_log_returns",
    "describe",
    "ljung_box",
    "write_stats_csv",
]

Source = Union[str, os.PathLike, bytes, IO[bytes], IO[str]]


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[dt.date, ...]
    prices: np.ndarray

    def __post_init__(self) -> None:
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 1 or prices.size < 2:
            raise DataError("a price series needs at least 2 observations")
        if len(self.dates) != prices.size:
            raise DataError("dates and prices differ in length")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise DataError("prices must be finite and strictly positive")
        for i in range(1, len(self.dates)):
            if not self.dates[i] > self.dates[i - 1]:
                raise DataError(f"dates not strictly increasing at position {i}: "
                                f"{self.dates[i - 1]} then {self.dates[i]}")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)

    def __len__(self) -> int:
        return self.prices.size


@dataclass(frozen=True)
class ReturnSeries:
    dates: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise DataError("returns must be a finite one-dimensional array")
        if len(self.dates) != values.size:
            raise DataError("dates and returns differ in length")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def from_values(cls, values: Iterable[float],
                    start: dt.date = dt.date(2000, 1, 1)) -> "ReturnSeries":
        """Wrap a bare array, attaching consecutive placeholder dates."""
        v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                       dtype=float)
        dates = tuple(start + dt.timedelta(days=i) for i in range(v.size))
        return cls(dates, v)


@dataclass(frozen=True)
class DescriptiveStats:
    n: int
    mean: float
    median: float
    max: float
    min: float
    sd: float
    skewness: float
    kurtosis: float
    jarque_bera_stat: float
    jarque_bera_p: float
    ljung_box: list[tuple[int, float, float]] = field(default_factory=list)
    ljung_box_squared: list[tuple[int, float, float]] = field(default_factory=list)

    def rows(self) -> list[tuple[str, float]]:
        out: list[tuple[str, float]] = [
            ("n", self.n), ("mean", self.mean), ("median", self.median),
            ("max", self.max), ("min", self.min), ("sd", self.sd),
            ("skewness", self.skewness), ("kurtosis", self.kurtosis),
            ("jarque_bera_stat", self.jarque_bera_stat),
            ("jarque_bera_p", self.jarque_bera_p),
        ]
        for lag, q, p in self.ljung_box:
            out += [(f"Q({lag})", q), (f"Q({lag})_p", p)]
        for lag, q, p in self.ljung_box_squared:
            out += [(f"Q2({lag})", q), (f"Q2({lag})_p", p)]
        return out


def _open_text(source: Source) -> tuple[IO[str], str]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), os.fspath(source)
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"), newline=""), "<bytes>"
    if isinstance(source, io.TextIOBase):
        return source, getattr(source, "name", "<stream>")
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), getattr(source, "name", "<stream>")


def load_prices(source: Source) -> PriceSeries:
    """Read a ``date,price`` CSV (ISO-8601 dates, header required).

    Raises
    ------
    DataError
        On a malformed row (with its line number), a non-positive price, or
        dates that are not strictly increasing.
    """
    fh, name = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{name}: empty file")
        cols = [h.strip().lower() for h in header]
        if cols[:2] != ["date", "price"]:
            raise DataError(f"{name}:1: expected header 'date,price', got {header!r}")
        dates: list[dt.date] = []
        prices: list[float] = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise DataError(f"{name}:{line}: expected 2 fields, got {len(row)}")
            try:
                d = dt.date.fromisoformat(row[0].strip())
                p = float(row[1])
            except ValueError as exc:
                raise DataError(f"{name}:{line}: malformed row {row!r}") from exc
            if not np.isfinite(p) or p <= 0:
                raise DataError(f"{name}:{line}: non-positive price {row[1]!r}")
            if dates and d <= dates[-1]:
                kind = "duplicate" if d == dates[-1] else "unsorted"
                raise DataError(f"{name}:{line}: {kind} date {d}")
            dates.append(d)
            prices.append(p)
    finally:
        if isinstance(source, (str, os.PathLike)):
            fh.close()
    return PriceSeries(tuple(dates), np.array(prices))


def neg_log_returns(p: PriceSeries) -> ReturnSeries:
    """``X_t = -log(p_t / p_{t-1})``; a loss is positive."""
    values = -np.diff(np.log(p.prices))
    return ReturnSeries(p.dates[1:], values)


def ljung_box(x: np.ndarray, lags: Sequence[int]) -> list[tuple[int, float, float]]:
    """``Q(m) = n(n+2) sum_{j<=m} r_j^2 / (n-j)`` with chi2(m) p-values."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    if denom == 0:
        raise DataError("degenerate series: zero variance")
    max_lag = max(lags)
    acf = np.array([np.dot(xc[j:], xc[:n - j]) / denom for j in range(1, max_lag + 1)])
    terms = np.cumsum(acf ** 2 / (n - np.arange(1, max_lag + 1)))
    return [(int(m), float(n * (n + 2) * terms[m - 1]),
             chi2_sf(float(n * (n + 2) * terms[m - 1]), int(m))) for m in lags]


def describe(r: ReturnSeries | np.ndarray, lb_lags: Sequence[int] = (1, 5, 10),
             lb_lags_squared: Sequence[int] | None = (1, 10)) -> DescriptiveStats:
    """Summary statistics, Jarque-Bera and Ljung-Box tests.

    ``sd`` uses ``ddof=1``. Skewness and (raw, non-excess) kurtosis are the
    moment estimators entering the Jarque-Bera statistic
    ``n (S^2/6 + (K-3)^2/24)``. Ljung-Box is computed on the returns at
    ``lb_lags`` and on squared returns at ``lb_lags_squared`` (defaults to
    ``lb_lags`` when ``None``).
    """
    x = np.asarray(r.values if isinstance(r, ReturnSeries) else r, dtype=float)
    lags = sorted(set(int(m) for m in lb_lags))
    lags_sq = lags if lb_lags_squared is None else sorted(set(int(m) for m in lb_lags_squared))
    n = x.size
    if lags and n <= max(lags + lags_sq) + 1:
        raise DataError("series too short for the requested Ljung-Box lags")
    if not np.ptp(x) > 0:
        raise DataError("degenerate series: zero variance")
    skew = float(stats.skew(x))
    kurt = float(stats.kurtosis(x, fisher=False))
    jb = n * (skew ** 2 / 6.0 + (kurt - 3.0) ** 2 / 24.0)
    return DescriptiveStats(
        n=n,
        mean=float(x.mean()),
        median=float(np.median(x)),
        max=float(x.max()),
        min=float(x.min()),
        sd=float(x.std(ddof=1)),
        skewness=skew,
        kurtosis=kurt,
        jarque_bera_stat=float(jb),
        jarque_bera_p=chi2_sf(float(jb), 2),
        ljung_box=ljung_box(x, lags) if lags else [],
        ljung_box_squared=ljung_box(x * x, lags_sq) if lags_sq else [],
    )


def write_stats_csv(st: DescriptiveStats, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        for key, value in st.rows():
            w.writerow([key, repr(value) if isinstance(value, float) else value])
