"""Independent cross-checks for the core numerics.

Each routine verifies a production algorithm through a different route:
eigenvalues via determinant sign changes instead of rotations,
likelihoods and decodings via exhaustive path enumeration instead of
dynamic programming, and the one-step forecast via Monte Carlo
transition sampling instead of the closed form. They are deliberately
slow and simple; keep them that way.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.special import logsumexp

from .hmm import GaussianHmm, as_observations, gaussian_logpdf_diag


def charpoly_eigenvalues(matrix: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by det-sign bisection.

    Scans the Gershgorin interval for sign changes of
    det(M - lambda I) (LU-based determinant, no rotations involved) and
    bisects each bracket. Assumes distinct eigenvalues, which holds
    almost surely for the random matrices the suite feeds it; densifies
    the scan until all n roots are bracketed.
    """
    m = np.asarray(matrix, dtype=np.float64)
    n = m.shape[0]

    def det_at(lam: float) -> float:
        return float(np.linalg.det(m - lam * np.eye(n)))

    radius = np.sum(np.abs(m), axis=1) - np.abs(np.diag(m))
    lo = float(np.min(np.diag(m) - radius)) - 1.0
    hi = float(np.max(np.diag(m) + radius)) + 1.0

    points = 64 * n
    brackets: list[tuple[float, float]] = []
    for _ in range(12):
        grid = np.linspace(lo, hi, points)
        values = np.array([det_at(g) for g in grid])
        signs = np.sign(values)
        brackets = [
            (grid[i], grid[i + 1])
            for i in range(len(grid) - 1)
            if signs[i] != 0 and signs[i + 1] != 0 and signs[i] != signs[i + 1]
        ]
        if len(brackets) == n:
            break
        points *= 2
    if len(brackets) != n:
        raise RuntimeError(
            f"bracketed {len(brackets)} of {n} eigenvalues; eigenvalues may "
            "be too clustered for the determinant scan"
        )

    roots = []
    for a, b in brackets:
        fa = det_at(a)
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = det_at(mid)
            if fm == 0.0 or (b - a) < tol * max(1.0, abs(mid)):
                a = b = mid
                break
            if (fa < 0) == (fm < 0):
                a, fa = mid, fm
            else:
                b = mid
        roots.append(0.5 * (a + b))
    return np.sort(np.array(roots))[::-1]


def _emission_table(model: GaussianHmm, obs: np.ndarray) -> np.ndarray:
    """T x N log emission densities via the scalar density, one call per
    (time, state) pair — separate from the production broadcast code."""
    T = obs.shape[0]
    table = np.empty((T, model.n_states))
    for t in range(T):
        for i in range(model.n_states):
            table[t, i] = gaussian_logpdf_diag(
                obs[t], model.means[i], model.variances[i]
            )
    return table


def path_log_prob(model: GaussianHmm, obs, path) -> float:
    """Joint log probability of a specific state path and the observations."""
    obs = as_observations(obs)
    with np.errstate(divide="ignore"):
        log_init = np.log(model.initial)
        log_trans = np.log(model.trans)
    total = log_init[path[0]] + gaussian_logpdf_diag(
        obs[0], model.means[path[0]], model.variances[path[0]]
    )
    for t in range(1, len(path)):
        total += log_trans[path[t - 1], path[t]] + gaussian_logpdf_diag(
            obs[t], model.means[path[t]], model.variances[path[t]]
        )
    return float(total)


def _all_path_log_probs(model: GaussianHmm, obs):
    obs = as_observations(obs)
    T = obs.shape[0]
    log_b = _emission_table(model, obs)
    with np.errstate(divide="ignore"):
        log_init = np.log(model.initial)
        log_trans = np.log(model.trans)
    for path in itertools.product(range(model.n_states), repeat=T):
        lp = log_init[path[0]] + log_b[0, path[0]]
        for t in range(1, T):
            lp += log_trans[path[t - 1], path[t]] + log_b[t, path[t]]
        yield path, float(lp)


def enumerate_log_likelihood(model: GaussianHmm, obs) -> float:
    """log P(obs) as an explicit sum over all N^T state paths."""
    terms = [lp for _, lp in _all_path_log_probs(model, obs)]
    return float(logsumexp(terms))


def enumerate_best_path(model: GaussianHmm, obs) -> tuple[np.ndarray, float]:
    """Exhaustive Viterbi: the maximizing path and its joint log prob.

    Tie handling matches the DP decoder, which fixes the final state
    first and walks backwards: among equal-probability paths the one
    whose reversed state tuple is lexicographically smallest wins.
    """
    best_path = None
    best_lp = -np.inf
    best_key = None
    for path, lp in _all_path_log_probs(model, obs):
        key = tuple(reversed(path))
        if lp > best_lp or (lp == best_lp and key < best_key):
            best_lp = lp
            best_path = path
            best_key = key
    return np.array(best_path, dtype=np.int64), float(best_lp)


def monte_carlo_factor_forecast(
    model: GaussianHmm, current_state: int, n_draws: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one-step transitions and average the landing-state means.

    Returns (estimate, standard_error) per factor dimension. Checks the
    identity E[o_{T+1} | z_T = i] = sum_j P[i, j] mu_j by sampling z_{T+1}.
    """
    rng = np.random.default_rng(seed)
    row = model.trans[current_state]
    draws = np.searchsorted(np.cumsum(row), rng.random(n_draws))
    sampled = model.means[draws]
    estimate = sampled.mean(axis=0)
    stderr = sampled.std(axis=0, ddof=1) / np.sqrt(n_draws)
    return estimate, stderr
