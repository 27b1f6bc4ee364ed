"""Column standardization and the truncated eigen-factor model.

A return window X is standardized column-wise to Y, the Gram matrix
H = Y^T Y is eigendecomposed, and the leading k eigenvectors are kept,
where k is the smallest count whose eigenvalue share reaches 1 - p for
a noise budget p in [0, 1). Factor returns are the projections Y E|_k;
forecasts travel back through E|_k^T and the stored column statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateColumn, DimensionMismatch, TooFewRows
from .ingest import ReturnsPanel
from .linalg import SymMatrix, sym_eig

SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class NormalizationStats:
    """Column means and sample standard deviations of the raw window."""

    mu: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class FactorModel:
    """Standardization stats plus the retained eigenvector block.

    ``loadings`` is n x k with orthonormal columns; ``explained_fraction``
    is the eigenvalue share captured by the first k directions. ``stats``
    holds the raw window's column statistics so a factor-space forecast
    can be mapped all the way back to plain returns.
    """

    stats: NormalizationStats
    eigenvalues: np.ndarray = field(repr=False)
    loadings: np.ndarray = field(repr=False)
    k: int
    p: float
    explained_fraction: float

    @property
    def n_assets(self) -> int:
        return self.loadings.shape[0]


@dataclass(frozen=True)
class FactorPanel:
    """T x k factor returns with the window's dates."""

    dates: tuple
    values: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.values.shape[1]


def normalize(panel: ReturnsPanel) -> tuple[np.ndarray, NormalizationStats]:
    """Standardize each asset column to mean 0 and sample std 1.

    Sample convention (T-1 denominator). A column with std below 1e-12
    is a constant asset and raises DegenerateColumn naming the ticker.
    """
    x = panel.returns
    if np.isnan(x).any():
        raise DegenerateColumn("window contains missing entries; use window_view first")
    if x.shape[0] < 2:
        raise TooFewRows("need at least two rows to standardize")
    mu = x.mean(axis=0)
    sigma = x.std(axis=0, ddof=1)
    bad = np.flatnonzero(sigma < SIGMA_FLOOR)
    if bad.size:
        raise DegenerateColumn(
            f"constant column(s): {', '.join(panel.assets[j] for j in bad)}"
        )
    y = (x - mu) / sigma
    return y, NormalizationStats(mu=mu.copy(), sigma=sigma.copy())


def fit_factor_model(
    y: np.ndarray, p: float, stats: NormalizationStats | None = None
) -> FactorModel:
    """Eigendecompose Y^T Y and keep the minimal k with share >= 1 - p.

    Shares are eigenvalues normalized by their sum, so the truncation
    rule is invariant to the overall scale of Y. ``stats`` should be the
    statistics returned by :func:`normalize`; when omitted, the columns
    of ``y`` are treated as the raw data (identity de-normalization up
    to its own moments).
    """
    if not (0.0 <= p < 1.0):
        raise ValueError(f"noise fraction p must be in [0, 1), got {p}")
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise DegenerateColumn("window contains non-finite values")
    n = y.shape[1]
    decomp = sym_eig(SymMatrix(y.T @ y))
    total = float(decomp.eigenvalues.sum())
    cum = np.cumsum(decomp.eigenvalues) / total
    k = n
    for i in range(n):
        if cum[i] >= 1.0 - p:
            k = i + 1
            break
    if stats is None:
        stats = NormalizationStats(mu=y.mean(axis=0), sigma=y.std(axis=0, ddof=1))
    return FactorModel(
        stats=stats,
        eigenvalues=decomp.eigenvalues,
        loadings=decomp.eigenvectors[:, :k].copy(),
        k=k,
        p=float(p),
        explained_fraction=float(cum[k - 1]),
    )


def factor_returns(y: np.ndarray, model: FactorModel, dates=()) -> FactorPanel:
    """Project the standardized window onto the retained directions."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[1] != model.n_assets:
        raise DimensionMismatch(
            f"window has {y.shape[1]} assets, model expects {model.n_assets}"
        )
    values = y @ model.loadings
    return FactorPanel(
        dates=tuple(dates) if len(dates) else tuple(range(len(y))), values=values
    )


def reconstruct_assets(
    fhat: np.ndarray, model: FactorModel
) -> tuple[np.ndarray, np.ndarray]:
    """Map a factor vector back to normalized and raw asset space.

    yhat = fhat E|_k^T, then xhat = sigma * yhat + mu using the window
    statistics stored on the model.
    """
    fhat = np.asarray(fhat, dtype=np.float64)
    if fhat.shape != (model.k,):
        raise DimensionMismatch(
            f"factor vector has shape {fhat.shape}, model expects ({model.k},)"
        )
    yhat = fhat @ model.loadings.T
    xhat = model.stats.sigma * yhat + model.stats.mu
    return yhat, xhat
