"""Selective classification for trading: bounds, thresholds, backtests and
the experiment pipeline, backed by the C++ core."""

from ._core import (
    __version__,
    binomial_tail,
    bstar,
    mcc,
    report,
    run_experiment,
    sgr,
    sharpe,
    simulate,
)

__all__ = [
    "__version__",
    "binomial_tail",
    "bstar",
    "mcc",
    "report",
    "run_experiment",
    "sgr",
    "sharpe",
    "simulate",
]
