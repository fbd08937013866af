"""Dynamic extreme Value-at-Risk by AR(1)-GARCH(1,1) filtering and
bias-reduced extreme quantile estimation on the standardized residuals."""

__version__ = "0.1.0"

from .backtest import (
    BacktestConfig,
    BacktestReport,
    christoffersen,
    kupiec,
    run_in_sample,
    run_out_of_sample,
)
from .data import describe, load_prices, neg_log_returns
from .evt import OrderedSample, hill, select_k_rho, ugh_quantile
from .garch import GarchFit, GarchParams, fit_qmle, simulate
from .var_engine import (
    Method,
    VaRForecast,
    forecast_garch_evt,
    forecast_garch_ugh,
    forecast_ugh_unfiltered,
)

__all__ = [
    "BacktestConfig",
    "BacktestReport",
    "GarchFit",
    "GarchParams",
    "Method",
    "OrderedSample",
    "VaRForecast",
    "christoffersen",
    "describe",
    "fit_qmle",
    "forecast_garch_evt",
    "forecast_garch_ugh",
    "forecast_ugh_unfiltered",
    "hill",
    "kupiec",
    "load_prices",
    "neg_log_returns",
    "run_in_sample",
    "run_out_of_sample",
    "select_k_rho",
    "simulate",
    "ugh_quantile",
]
