"""Day-ahead load forecasting: PSF, N-BEATS, LSTM and TCN forecasters with a
rolling backtest harness and drift monitoring."""

from ._core import (
    Forecaster,
    LoadSeries,
    ParseError,
    backtest,
    cli,
    covariates,
    mape,
    monitor,
    parse_csv,
    read_csv,
    run_grid,
    split_by_dates,
    synthetic,
    tcn_num_layers,
    tcn_receptive_field,
    write_csv,
)

__all__ = [
    "Forecaster",
    "LoadSeries",
    "ParseError",
    "backtest",
    "cli",
    "covariates",
    "mape",
    "monitor",
    "parse_csv",
    "read_csv",
    "run_grid",
    "split_by_dates",
    "synthetic",
    "tcn_num_layers",
    "tcn_receptive_field",
    "write_csv",
]
