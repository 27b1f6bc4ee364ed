"""One-step-ahead forecasts from a fitted regime model.

The current regime is the last state of the Viterbi path over the
fitting window. The factor forecast is the transition-probability
mixture of the state means from that regime; truncated factors are
forecast at zero because standardized columns have zero time-average.
The factor forecast then maps back to normalized and raw asset returns,
whose signs drive the two trading strategies.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .hmm import FitResult, as_observations, viterbi
from .pca import FactorModel, FactorPanel, reconstruct_assets


@dataclass(frozen=True)
class ForecastRecord:
    """Everything produced for one forecast-target date."""

    date: dt.date | None
    current_state: int
    factor_forecast: np.ndarray
    normalized_forecast: np.ndarray = field(repr=False)
    raw_forecast: np.ndarray = field(repr=False)
    signs_raw: np.ndarray = field(repr=False)
    signs_normalized: np.ndarray = field(repr=False)


def forecast_factors(fit: FitResult, obs) -> tuple[np.ndarray, int]:
    """Expected next-period factor vector and the decoded current state.

    With the chain currently in state i, the expectation of the next
    observation is sum_j P[i, j] * mu_j, one value per factor dimension.
    """
    obs = as_observations(obs)
    path = viterbi(fit.model, obs)
    current = int(path[-1])
    fhat = fit.model.trans[current] @ fit.model.means
    return fhat, current


def make_forecast(
    fit: FitResult,
    factors: FactorPanel,
    model: FactorModel,
    target_date: dt.date | None = None,
) -> ForecastRecord:
    """Compose the factor forecast with the asset-space reconstruction.

    ``factors`` must be the panel the HMM was fitted on and ``model``
    the factor model that produced it. A forecast of exactly zero gets
    sign 0, meaning no position in that asset.
    """
    fhat, current = forecast_factors(fit, factors.values)
    yhat, xhat = reconstruct_assets(fhat, model)
    return ForecastRecord(
        date=target_date,
        current_state=current,
        factor_forecast=fhat,
        normalized_forecast=yhat,
        raw_forecast=xhat,
        signs_raw=np.sign(xhat).astype(np.int64),
        signs_normalized=np.sign(yhat).astype(np.int64),
    )
