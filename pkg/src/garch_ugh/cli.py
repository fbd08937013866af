"""Command-line front end.

Examples::

    garch-ugh --mode describe --input dj.csv --out results/
    garch-ugh --mode in_sample --input dj.csv --out results/
    garch-ugh --mode out_of_sample --input dj.csv --wt 3000 --we 1000 --threads 4

Exit status: 0 on success, 1 on invalid configuration or input, 2 when a
computation fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

from . import __version__
from .backtest import (
    DEFAULT_K_FRACTIONS,
    DEFAULT_TAUS,
    BacktestConfig,
    BacktestError,
    BacktestReport,
    run_in_sample,
    run_out_of_sample,
    write_reports_csv,
    write_reports_json,
)
from .data import describe, load_prices, neg_log_returns, write_stats_csv
from .exceptions import DataError
from .var_engine import Method

log = logging.getLogger("garch_ugh")

MODES = ("describe", "in_sample", "out_of_sample")
EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTATION = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    input: str | None = None
    mode: str = "out_of_sample"
    methods: tuple[str, ...] = tuple(m.value for m in Method)
    tau_levels: tuple[float, ...] = DEFAULT_TAUS
    k_fractions: tuple[float, ...] = DEFAULT_K_FRACTIONS
    wt: int = 3000
    we: int = 1000
    seed: int = 0
    out: str = "garch_ugh_output"
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    lb_lags: tuple[int, ...] = (1, 5, 10)
    lb_lags_squared: tuple[int, ...] = (1, 10)

    def validate(self) -> None:
        if not self.input:
            raise ConfigError("--input is required")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        valid = {m.value for m in Method}
        bad = [m for m in self.methods if m not in valid]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; choose from {sorted(valid)}")
        if not self.tau_levels or not all(0.9 < t < 1 for t in self.tau_levels):
            raise ConfigError("tau levels must lie in (0.9, 1)")
        if not self.k_fractions or not all(0 < k < 0.5 for k in self.k_fractions):
            raise ConfigError("k fractions must lie in (0, 0.5)")
        if self.we < 100:
            raise ConfigError("estimation window (--we) must be at least 100")
        if self.wt < 2:
            raise ConfigError("testing window (--wt) must be at least 2")
        if self.threads < 1:
            raise ConfigError("--threads must be >= 1")

    def backtest_config(self) -> BacktestConfig:
        return BacktestConfig(
            methods=tuple(Method(m) for m in self.methods),
            taus=tuple(self.tau_levels),
            k_fractions=tuple(self.k_fractions),
            test_window=self.wt,
            estimation_window=self.we,
            workers=self.threads,
        )


def _csv_floats(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in s.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def _csv_strs(s: str) -> tuple[str, ...]:
    return tuple(v.strip().lower() for v in s.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="garch-ugh",
        description="Dynamic extreme VaR by AR(1)-GARCH(1,1) filtering and "
                    "bias-reduced tail estimation, with VaR backtests.")
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--input", help="CSV with header 'date,price'")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--tau", type=_csv_floats, dest="tau_levels",
                   help="comma-separated VaR levels (default 0.99,0.995,0.999)")
    p.add_argument("--k-frac", type=_csv_floats, dest="k_fractions",
                   help="comma-separated tail fractions (default 0.05,...,0.25)")
    p.add_argument("--wt", type=int, help="testing window length (default 3000)")
    p.add_argument("--we", type=int, help="estimation window length (default 1000)")
    p.add_argument("--methods", type=_csv_strs,
                   help="comma-separated subset of garch_ugh,garch_evt,ugh")
    p.add_argument("--seed", type=int, help="recorded in the run metadata")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker processes (default: all CPUs)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for k, v in raw.items():
            setattr(cfg, k, tuple(v) if isinstance(v, list) else v)
    for name in ("input", "mode", "tau_levels", "k_fractions", "wt", "we",
                 "methods", "seed", "out", "threads"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    cfg.validate()
    return cfg


def format_summary(reports: Sequence[BacktestReport]) -> str:
    """Text table: per level, the expected count then one count row and one
    ``(p_uc, p_cc)`` row per method across the tail fractions."""
    if not reports:
        return ""
    kfs = sorted({r.k_fraction for r in reports})
    by = {(r.method, r.tau, r.k_fraction): r for r in reports}
    methods = list(dict.fromkeys(r.method for r in reports))
    lines = []
    w = 16
    lines.append("% of top obs. used".ljust(12) + "".join(f"{kf:.0%}".rjust(w) for kf in kfs))
    for tau in sorted({r.tau for r in reports}, reverse=True):
        lines.append(f"{tau} quantile")
        any_rep = next(r for r in reports if r.tau == tau)
        lines.append("Expected".ljust(12) + "".join(f"{any_rep.expected:g}".rjust(w) for _ in kfs))
        for m in methods:
            counts, pvals = [], []
            for kf in kfs:
                r = by.get((m, tau, kf))
                counts.append("-" if r is None else str(r.observed))
                pvals.append("" if r is None else f"({r.test.p_uc:.3f}, {r.test.p_cc:.3f})")
            lines.append(m.value.ljust(12) + "".join(c.rjust(w) for c in counts))
            lines.append("".ljust(12) + "".join(p.rjust(w) for p in pvals))
    return "\n".join(lines)


def cmd_describe(cfg: RunConfig) -> int:
    prices = load_prices(cfg.input)
    returns = neg_log_returns(prices)
    st = describe(returns, cfg.lb_lags, cfg.lb_lags_squared)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_stats_csv(st, out / "describe.csv")
    for key, value in st.rows():
        print(f"{key:>18}  {value:.6g}" if isinstance(value, float) else f"{key:>18}  {value}")
    return EXIT_OK


def cmd_backtest(cfg: RunConfig, mode: str) -> int:
    prices = load_prices(cfg.input)
    returns = neg_log_returns(prices)
    bt = cfg.backtest_config()
    need = bt.test_window + (bt.estimation_window if mode == "out_of_sample" else 0)
    if len(returns) < need:
        raise ConfigError(f"{cfg.input}: {len(returns)} returns, but mode {mode} "
                          f"needs at least {need}")
    if mode == "in_sample":
        reports = run_in_sample(returns, bt)
    else:
        reports = run_out_of_sample(returns, bt)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_reports_csv(reports, out / f"{mode}_reports.csv")
    write_reports_json(reports, out / f"{mode}_reports.json", dates=returns.dates)
    with open(out / f"{mode}_config.json", "w", encoding="utf-8") as fh:
        json.dump(asdict(cfg), fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"Testing window {bt.test_window}"
          + (f", estimation window {bt.estimation_window}" if mode == "out_of_sample" else ""))
    print(format_summary(reports))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if cfg.mode == "describe":
            return cmd_describe(cfg)
        return cmd_backtest(cfg, cfg.mode)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (BacktestError, ArithmeticError, ValueError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
