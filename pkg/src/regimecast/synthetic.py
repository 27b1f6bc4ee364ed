"""Seeded synthetic market data with known regime structure.

Used by the test suite and the self-test oracles: a two-state Markov
chain drives latent factor means, assets load linearly on the factors,
and everything downstream (prices, CSV fixture) is deterministic in the
seed. Ground truth is returned alongside so recovery can be scored.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .ingest import PricePanel, ReturnsPanel


def sample_states(rng: np.random.Generator, trans: np.ndarray, n: int,
                  initial: np.ndarray | None = None) -> np.ndarray:
    """Sample a Markov chain path of length n from a transition matrix."""
    n_states = trans.shape[0]
    if initial is None:
        initial = np.full(n_states, 1.0 / n_states)
    cum_init = np.cumsum(initial)
    cum_rows = np.cumsum(trans, axis=1)
    states = np.empty(n, dtype=np.int64)
    states[0] = np.searchsorted(cum_init, rng.random())
    for t in range(1, n):
        states[t] = np.searchsorted(cum_rows[states[t - 1]], rng.random())
    return states


def sample_gaussian_chain(
    seed: int,
    means: np.ndarray,
    sigmas: np.ndarray,
    trans: np.ndarray,
    n: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (observations, states) from a diagonal-Gaussian HMM.

    ``means`` and ``sigmas`` are (n_states, k); emission dimension d of
    state i is N(means[i, d], sigmas[i, d]^2).
    """
    rng = np.random.default_rng(seed)
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    sigmas = np.atleast_2d(np.asarray(sigmas, dtype=np.float64))
    states = sample_states(rng, np.asarray(trans, dtype=np.float64), n)
    noise = rng.standard_normal((n, means.shape[1]))
    obs = means[states] + sigmas[states] * noise
    return obs, states


@dataclass(frozen=True)
class RegimeMarketSpec:
    """Parameters of the synthetic two-regime factor market."""

    n_assets: int = 20
    n_periods: int = 800
    persistence: float = 0.95
    factor_state_means: tuple = ((0.022, -0.008), (-0.018, 0.008))  # (state, factor)
    factor_sigmas: tuple = (0.025, 0.02)
    beta_range: tuple = (0.4, 1.6)
    beta2_range: tuple = (-0.8, 0.8)
    idio_sigma_range: tuple = (0.01, 0.03)
    drift_mean: float = 0.0005
    drift_sigma: float = 0.001
    start_price: float = 100.0
    start_date: dt.date = dt.date(2005, 1, 7)


def make_regime_market(
    seed: int, spec: RegimeMarketSpec = RegimeMarketSpec()
) -> tuple[ReturnsPanel, dict]:
    """Generate a returns panel driven by two latent regime factors.

    Returns the panel and a ground-truth dict with the state path,
    factor draws, loadings, drifts and the generating transition matrix.
    """
    rng = np.random.default_rng(seed)
    q = spec.persistence
    trans = np.array([[q, 1.0 - q], [1.0 - q, q]])
    state_means = np.asarray(spec.factor_state_means, dtype=np.float64)
    n_factors = state_means.shape[1]
    sigmas = np.asarray(spec.factor_sigmas, dtype=np.float64)

    states = sample_states(rng, trans, spec.n_periods)
    factors = state_means[states] + sigmas * rng.standard_normal(
        (spec.n_periods, n_factors)
    )

    loadings = np.column_stack(
        [
            rng.uniform(*spec.beta_range, size=spec.n_assets),
            rng.uniform(*spec.beta2_range, size=spec.n_assets),
        ]
    )[:, :n_factors]
    idio_sigma = rng.uniform(*spec.idio_sigma_range, size=spec.n_assets)
    drift = spec.drift_mean + spec.drift_sigma * rng.standard_normal(spec.n_assets)

    returns = (
        drift
        + factors @ loadings.T
        + idio_sigma * rng.standard_normal((spec.n_periods, spec.n_assets))
    )
    returns = np.maximum(returns, -0.95)  # simple returns must stay above -1

    dates = weekly_dates(spec.start_date, spec.n_periods)
    assets = tuple(f"SYN{i:03d}" for i in range(spec.n_assets))
    panel = ReturnsPanel(dates=dates, assets=assets, returns=returns)
    truth = {
        "states": states,
        "factors": factors,
        "loadings": loadings,
        "idio_sigma": idio_sigma,
        "drift": drift,
        "trans": trans,
        "state_means": state_means,
    }
    return panel, truth


def weekly_dates(start: dt.date, n: int) -> tuple[dt.date, ...]:
    return tuple(start + dt.timedelta(weeks=i) for i in range(n))


def returns_to_prices(panel: ReturnsPanel, start_price: float = 100.0,
                      start_date: dt.date | None = None) -> PricePanel:
    """Compound a returns panel into a price panel (one extra leading row)."""
    levels = start_price * np.cumprod(1.0 + panel.returns, axis=0)
    first = np.full((1, panel.n_assets), start_price)
    if start_date is None:
        start_date = panel.dates[0] - (panel.dates[1] - panel.dates[0])
    return PricePanel(
        dates=(start_date,) + tuple(panel.dates),
        assets=panel.assets,
        prices=np.vstack([first, levels]),
    )


def write_price_csv(panel: PricePanel, path) -> None:
    """Serialize a price panel in the loader's CSV format.

    Full-precision repr formatting so load_price_csv round-trips bit
    exactly; missing entries become empty cells.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("date," + ",".join(panel.assets) + "\n")
        for date, row in zip(panel.dates, panel.prices):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in row]
            fh.write(date.isoformat() + "," + ",".join(cells) + "\n")
