"""Regime-switching factor forecasts for asset returns.

Pipeline: standardize a window of returns, build a truncated
eigen-factor model, fit a diagonal-Gaussian hidden Markov model to the
factor series, forecast the next period from the decoded regime, and
map the forecast back to tradable per-asset signs. A rolling backtest
engine scores the resulting strategies on winning probability and
annualized Sharpe ratio.
"""

from .backtest import (
    BacktestConfig,
    BacktestReport,
    annualized_sharpe,
    buy_and_hold,
    diagnostics,
    run_backtest,
    strategy_positions,
    winning_probability,
)
from .forecast import ForecastRecord, forecast_factors, make_forecast
from .hmm import (
    FitResult,
    GaussianHmm,
    baum_welch,
    gaussian_logpdf_diag,
    init_params,
    log_forward,
    select_model,
    viterbi,
)
from .ingest import (
    PricePanel,
    ReturnsPanel,
    compute_returns,
    load_price_csv,
    window_view,
)
from .linalg import EigenDecomposition, SymMatrix, sym_eig
from .pca import (
    FactorModel,
    FactorPanel,
    NormalizationStats,
    factor_returns,
    fit_factor_model,
    normalize,
    reconstruct_assets,
)

__all__ = [
    "BacktestConfig",
    "BacktestReport",
    "EigenDecomposition",
    "FactorModel",
    "FactorPanel",
    "FitResult",
    "ForecastRecord",
    "GaussianHmm",
    "NormalizationStats",
    "PricePanel",
    "ReturnsPanel",
    "SymMatrix",
    "annualized_sharpe",
    "baum_welch",
    "buy_and_hold",
    "compute_returns",
    "diagnostics",
    "factor_returns",
    "fit_factor_model",
    "forecast_factors",
    "gaussian_logpdf_diag",
    "init_params",
    "load_price_csv",
    "log_forward",
    "make_forecast",
    "normalize",
    "reconstruct_assets",
    "run_backtest",
    "select_model",
    "strategy_positions",
    "sym_eig",
    "viterbi",
    "window_view",
    "winning_probability",
]
