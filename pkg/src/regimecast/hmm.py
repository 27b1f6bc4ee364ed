"""Diagonal-Gaussian hidden Markov model.

Log-likelihood (forward algorithm), most-probable path (Viterbi),
expectation-maximization estimation (Baum-Welch) and AIC state-count
selection, all for emissions that are multivariate normal with a
diagonal covariance per state.

Likelihoods accumulate in the log domain with per-step max-shift
rescaling (the log-sum-exp trick applied at every recursion step), so
nothing underflows regardless of sequence length. The hot recursions
are JIT compiled; fitting is a pure, deterministic function of its
arguments (initialization is deterministic too), so identical inputs
always give identical fits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import (
    AllFitsFailed,
    DimensionMismatch,
    EmptyStateWarning,
    NonPositiveVariance,
    RegimecastError,
    TooFewObservations,
)

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 200
DEFAULT_CANDIDATES = (2, 3, 4, 5, 6, 7, 8)
RESPONSIBILITY_EPS = 1e-8
# Relative floor large enough to actually stop variance collapse: a state
# may not shrink below 0.1% of a dimension's marginal variance, or EM buys
# spurious likelihood by parking a near-delta state on a handful of points.
VAR_FLOOR_REL = 1e-3
VAR_FLOOR_ABS = 1e-12
MEAN_OFFSET_STEP = 0.1  # symmetry-breaking spread of initial state means


@dataclass(frozen=True)
class GaussianHmm:
    """HMM parameters: initial distribution, transitions, per-state
    diagonal Gaussians over k observation dimensions."""

    initial: np.ndarray
    trans: np.ndarray
    means: np.ndarray = field(repr=False)
    variances: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.initial.shape[0]
        if self.trans.shape != (n, n):
            raise DimensionMismatch(
                f"transition matrix {self.trans.shape} does not match {n} states"
            )
        if self.means.shape != self.variances.shape or self.means.shape[0] != n:
            raise DimensionMismatch("means/variances must both be (n_states, k)")
        if np.any(self.initial < 0.0) or np.any(self.trans < 0.0):
            raise ValueError("probabilities must be non-negative")
        if abs(float(self.initial.sum()) - 1.0) > 1e-12:
            raise ValueError("initial distribution must sum to 1")
        rows = self.trans.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-12):
            raise ValueError("every transition row must sum to 1")
        if np.any(self.variances <= 0.0):
            raise NonPositiveVariance("all emission variances must be positive")

    @property
    def n_states(self) -> int:
        return self.initial.shape[0]

    @property
    def n_dims(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class FitResult:
    """Fitted model plus the log-likelihood trace of the EM run.

    ``log_likelihood`` always corresponds to ``model`` (the trace's last
    entry); ``iterations`` counts E-step evaluations.
    """

    model: GaussianHmm
    log_likelihood: float
    ll_trace: np.ndarray
    iterations: int
    converged: bool


def gaussian_logpdf_diag(x, mean, var) -> float:
    """Log density of a diagonal-covariance Gaussian at x.

    Sum over dimensions of -(log(2 pi v) + (x-m)^2/v) / 2.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    var = np.atleast_1d(np.asarray(var, dtype=np.float64))
    if x.shape != mean.shape or x.shape != var.shape:
        raise DimensionMismatch("x, mean and var must share one length")
    if np.any(var <= 0.0):
        raise NonPositiveVariance("variance entries must be positive")
    return float(
        -0.5 * np.sum(np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)
    )


def as_observations(obs) -> np.ndarray:
    """Coerce input to a T x k float matrix (1-D input becomes T x 1)."""
    a = np.asarray(obs, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2 or a.shape[0] < 1:
        raise DimensionMismatch(f"observations must be T x k, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("observations contain non-finite values")
    return a


def _log_emissions(obs: np.ndarray, model: GaussianHmm) -> np.ndarray:
    """T x N matrix of per-state log emission densities."""
    if obs.shape[1] != model.n_dims:
        raise DimensionMismatch(
            f"observations have {obs.shape[1]} dims, model has {model.n_dims}"
        )
    const = -0.5 * np.sum(np.log(2.0 * np.pi * model.variances), axis=1)
    diff = obs[:, None, :] - model.means[None, :, :]
    quad = -0.5 * np.sum(diff * diff / model.variances[None, :, :], axis=2)
    return const[None, :] + quad


def _safe_log(a: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a)


@njit(cache=True)
def _shift_emissions(log_b):
    """Per-step max shift: e[t,j] = exp(log_b[t,j] - max_j log_b[t,j]).

    The shifted values live in (0, 1] so products with probabilities
    cannot overflow, and the shifts are returned for log-space
    reassembly of the likelihood.
    """
    T, n = log_b.shape
    e = np.empty((T, n))
    mb = np.empty(T)
    for t in range(T):
        m = log_b[t, 0]
        for j in range(1, n):
            if log_b[t, j] > m:
                m = log_b[t, j]
        mb[t] = m
        for j in range(n):
            e[t, j] = np.exp(log_b[t, j] - m)
    return e, mb


@njit(cache=True)
def _forward_ll(log_init, log_trans, log_b):
    """Log-likelihood by the forward recursion.

    Standard per-step rescaling: each step's state vector is shifted by
    the step maximum and renormalized, with the log of every scale
    factor accumulated, so nothing underflows however long the series.
    """
    T, n = log_b.shape
    e, mb = _shift_emissions(log_b)
    P = np.exp(log_trans)
    a = np.empty(n)
    s = 0.0
    for j in range(n):
        a[j] = np.exp(log_init[j]) * e[0, j]
        s += a[j]
    if s == 0.0:
        return -np.inf
    ll = np.log(s) + mb[0]
    for j in range(n):
        a[j] /= s
    for t in range(1, T):
        new = np.empty(n)
        s = 0.0
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += a[i] * P[i, j]
            acc *= e[t, j]
            new[j] = acc
            s += acc
        if s == 0.0:
            return -np.inf
        ll += np.log(s) + mb[t]
        for j in range(n):
            new[j] /= s
        a = new
    return ll


@njit(cache=True)
def _forward_backward(log_init, log_trans, log_b):
    """Posterior state marginals and summed transition posteriors.

    Returns (log_likelihood, gamma[T,N], xi_sum[N,N]) where gamma[t,i]
    is P(z_t = i | obs) and xi_sum[i,j] = sum_t P(z_t=i, z_{t+1}=j | obs).
    Same per-step rescaling as the forward pass; the backward pass
    reuses the forward scale factors so gamma needs no renormalization.
    """
    T, n = log_b.shape
    e, mb = _shift_emissions(log_b)
    P = np.exp(log_trans)
    a = np.empty((T, n))
    norms = np.empty(T)
    s = 0.0
    for j in range(n):
        a[0, j] = np.exp(log_init[j]) * e[0, j]
        s += a[0, j]
    if s == 0.0:
        return -np.inf, np.zeros((T, n)), np.zeros((n, n))
    norms[0] = s
    ll = np.log(s) + mb[0]
    for j in range(n):
        a[0, j] /= s
    for t in range(1, T):
        s = 0.0
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += a[t - 1, i] * P[i, j]
            acc *= e[t, j]
            a[t, j] = acc
            s += acc
        if s == 0.0:
            return -np.inf, np.zeros((T, n)), np.zeros((n, n))
        norms[t] = s
        ll += np.log(s) + mb[t]
        for j in range(n):
            a[t, j] /= s

    gamma = np.empty((T, n))
    xi_sum = np.zeros((n, n))
    beta = np.ones(n)
    for i in range(n):
        gamma[T - 1, i] = a[T - 1, i]
    for t in range(T - 2, -1, -1):
        new_beta = np.empty(n)
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += P[i, j] * e[t + 1, j] * beta[j]
            new_beta[i] = acc / norms[t + 1]
        for i in range(n):
            gamma[t, i] = a[t, i] * new_beta[i]
            f = a[t, i] / norms[t + 1]
            for j in range(n):
                xi_sum[i, j] += f * P[i, j] * e[t + 1, j] * beta[j]
        beta = new_beta
    return ll, gamma, xi_sum


@njit(cache=True)
def _viterbi_path(log_init, log_trans, log_b):
    """Most probable state path; ties resolve to the lower state index."""
    T, n = log_b.shape
    delta = log_init + log_b[0]
    psi = np.zeros((T, n), dtype=np.int64)
    for t in range(1, T):
        new = np.empty(n)
        for j in range(n):
            best = -np.inf
            arg = 0
            for i in range(n):
                v = delta[i] + log_trans[i, j]
                if v > best:
                    best = v
                    arg = i
            new[j] = best + log_b[t, j]
            psi[t, j] = arg
        delta = new
    best = -np.inf
    z = 0
    for i in range(n):
        if delta[i] > best:
            best = delta[i]
            z = i
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = z
    for t in range(T - 1, 0, -1):
        z = psi[t, z]
        path[t - 1] = z
    return path


def log_forward(model: GaussianHmm, obs) -> float:
    """log P(obs | model) via the scaled forward algorithm."""
    obs = as_observations(obs)
    log_b = _log_emissions(obs, model)
    return float(
        _forward_ll(_safe_log(model.initial), _safe_log(model.trans), log_b)
    )


def viterbi(model: GaussianHmm, obs) -> np.ndarray:
    """argmax_Z P(Z | obs, model) as an int array of state indices."""
    obs = as_observations(obs)
    log_b = _log_emissions(obs, model)
    return _viterbi_path(_safe_log(model.initial), _safe_log(model.trans), log_b)


def _variance_floor(obs: np.ndarray) -> np.ndarray:
    sample_var = obs.var(axis=0, ddof=1) if obs.shape[0] > 1 else obs.var(axis=0)
    return np.maximum(VAR_FLOOR_REL * sample_var, VAR_FLOOR_ABS)


def init_params(obs, j: int) -> GaussianHmm:
    """Deterministic EM starting point.

    Uniform initial distribution and uniform transition rows. Every
    state starts at the sample variance; state means fan out around the
    sample mean in steps of 0.1 sample standard deviations, which breaks
    the exact symmetry that would otherwise pin EM at a fixed point
    where the states never separate.
    """
    obs = as_observations(obs)
    if j < 2:
        raise ValueError(f"state count must be >= 2, got {j}")
    if obs.shape[0] < 2:
        raise TooFewObservations("need at least two observations")
    k = obs.shape[1]
    mean = obs.mean(axis=0)
    var = np.maximum(obs.var(axis=0, ddof=1), VAR_FLOOR_ABS)
    std = np.sqrt(var)
    offsets = (np.arange(j) - (j - 1) / 2.0) * MEAN_OFFSET_STEP
    means = mean[None, :] + offsets[:, None] * std[None, :]
    return GaussianHmm(
        initial=np.full(j, 1.0 / j),
        trans=np.full((j, j), 1.0 / j),
        means=means,
        variances=np.tile(var, (j, 1)),
    )


def baum_welch(
    obs,
    j: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    init: GaussianHmm | None = None,
) -> FitResult:
    """Fit a j-state diagonal-Gaussian HMM by expectation-maximization.

    Stops when the log-likelihood improves by less than ``tol`` or after
    ``max_iter`` E-steps. The returned model is always the one whose
    log-likelihood closes the trace, so the trace is non-decreasing and
    ends at ``log_likelihood``. A state whose total responsibility mass
    falls below 1e-8 is frozen for that iteration and an
    EmptyStateWarning is issued.
    """
    obs = as_observations(obs)
    if obs.shape[0] < 2 * j:
        raise TooFewObservations(
            f"need at least {2 * j} observations to fit {j} states, got {obs.shape[0]}"
        )
    model = init if init is not None else init_params(obs, j)
    if model.n_dims != obs.shape[1]:
        raise DimensionMismatch("initial model dimension does not match observations")
    floor = _variance_floor(obs)

    trace: list[float] = []
    converged = False
    for it in range(max_iter):
        log_b = _log_emissions(obs, model)
        ll, gamma, xi_sum = _forward_backward(
            _safe_log(model.initial), _safe_log(model.trans), log_b
        )
        if not np.isfinite(ll):
            raise NonPositiveVariance(
                "observation sequence has zero likelihood under the current "
                "parameters; data and model are incompatible"
            )
        trace.append(float(ll))
        if it > 0 and trace[-1] - trace[-2] < tol:
            converged = True
            break
        if it < max_iter - 1:
            model = _m_step(model, obs, gamma, xi_sum, floor)
    return FitResult(
        model=model,
        log_likelihood=trace[-1],
        ll_trace=np.asarray(trace),
        iterations=len(trace),
        converged=converged,
    )


def _m_step(
    model: GaussianHmm,
    obs: np.ndarray,
    gamma: np.ndarray,
    xi_sum: np.ndarray,
    floor: np.ndarray,
) -> GaussianHmm:
    n = model.n_states
    mass = gamma.sum(axis=0)
    trans_mass = gamma[:-1].sum(axis=0)
    empty = mass < RESPONSIBILITY_EPS
    if empty.any():
        warnings.warn(
            f"state(s) {np.flatnonzero(empty).tolist()} received no responsibility "
            "mass; frozen for this iteration",
            EmptyStateWarning,
            stacklevel=3,
        )

    initial = gamma[0] / gamma[0].sum()

    trans = model.trans.copy()
    means = model.means.copy()
    variances = model.variances.copy()
    for i in range(n):
        if empty[i]:
            continue
        if trans_mass[i] > RESPONSIBILITY_EPS:
            row = xi_sum[i] / trans_mass[i]
            trans[i] = row / row.sum()
        w = gamma[:, i]
        means[i] = w @ obs / mass[i]
        dev = obs - means[i]
        variances[i] = np.maximum(w @ (dev * dev) / mass[i], floor)
    return GaussianHmm(
        initial=initial, trans=trans, means=means, variances=variances
    )


def n_free_params(j: int, k: int) -> int:
    """Free parameters of a j-state model over k dims:
    (j-1) initial + j(j-1) transition + 2jk Gaussian."""
    return j * j - 1 + 2 * j * k


def aic_score(log_likelihood: float, j: int, k: int, penalty: str) -> float:
    """AIC = -2 logL + 2 * complexity.

    ``penalty='states'`` charges the state count itself;
    ``penalty='free_params'`` charges the usual free-parameter count.
    """
    if penalty == "states":
        return -2.0 * log_likelihood + 2.0 * j
    if penalty == "free_params":
        return -2.0 * log_likelihood + 2.0 * n_free_params(j, k)
    raise ValueError(f"unknown aic penalty {penalty!r}")


def select_model(
    obs,
    candidates=DEFAULT_CANDIDATES,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    aic_penalty: str = "states",
) -> tuple[FitResult, list[dict]]:
    """Fit every candidate state count and keep the lowest AIC.

    Ties and equal scores go to the smaller state count. Individual fit
    failures are recorded in the returned table; AllFitsFailed is raised
    only if no candidate succeeds.
    """
    obs = as_observations(obs)
    cands = sorted(set(int(j) for j in candidates))
    if not cands:
        raise ValueError("candidate list must be non-empty")
    k = obs.shape[1]
    table: list[dict] = []
    best: FitResult | None = None
    best_aic = np.inf
    for j in cands:
        try:
            fit = baum_welch(obs, j, tol=tol, max_iter=max_iter)
        except RegimecastError as exc:
            table.append(
                {"n_states": j, "log_likelihood": None, "aic": None,
                 "converged": False, "error": f"{type(exc).__name__}: {exc}"}
            )
            continue
        aic = aic_score(fit.log_likelihood, j, k, aic_penalty)
        table.append(
            {"n_states": j, "log_likelihood": fit.log_likelihood, "aic": aic,
             "converged": fit.converged, "error": None}
        )
        if aic < best_aic:
            best = fit
            best_aic = aic
    if best is None:
        raise AllFitsFailed(
            "; ".join(row["error"] for row in table if row["error"])
        )
    return best, table
