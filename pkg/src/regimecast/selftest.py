"""Built-in verification suite behind ``regimecast selftest``.

Runs the independent oracle checks at reduced scale so a fresh install
can prove its numerics in seconds: determinant-bisection eigenvalues
against the rotation solver, exhaustive path enumeration against the
forward and Viterbi recursions, EM monotonicity, Monte Carlo
confirmation of the one-step forecast identity, and ground-truth
recovery on simulated regimes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import hmm, oracles
from .linalg import SymMatrix, sym_eig
from .synthetic import sample_gaussian_chain


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    module: str
    passed: bool
    detail: str
    seconds: float


def _random_model(rng, n_states: int, k: int) -> hmm.GaussianHmm:
    return hmm.GaussianHmm(
        initial=rng.dirichlet(np.ones(n_states)),
        trans=rng.dirichlet(np.ones(n_states), size=n_states),
        means=rng.normal(scale=1.5, size=(n_states, k)),
        variances=rng.uniform(0.2, 2.0, size=(n_states, k)),
    )


def check_eigen_charpoly() -> tuple[bool, str]:
    """Jacobi eigenvalues match determinant-bisection roots (n = 4, 5)."""
    rng = np.random.default_rng(101)
    worst = 0.0
    for trial in range(10):
        n = 4 + trial % 2
        a = rng.standard_normal((n, n))
        a = (a + a.T) / 2.0
        ours = sym_eig(SymMatrix(a)).eigenvalues
        ref = oracles.charpoly_eigenvalues(a)
        worst = max(worst, float(np.max(np.abs(ours - ref))))
    return worst <= 1e-8, f"max |eig - charpoly root| = {worst:.3e}"


def check_eigen_reconstruction() -> tuple[bool, str]:
    """Residual and orthonormality bounds on random symmetric input."""
    rng = np.random.default_rng(202)
    worst_res = worst_orth = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 60))
        a = rng.standard_normal((n, n))
        a = (a + a.T) / 2.0
        dec = sym_eig(SymMatrix(a))
        v, lam = dec.eigenvectors, dec.eigenvalues
        res = np.linalg.norm(a - (v * lam) @ v.T, "fro") / max(
            1.0, np.linalg.norm(a, "fro")
        )
        orth = np.max(np.abs(v.T @ v - np.eye(n)))
        worst_res = max(worst_res, float(res))
        worst_orth = max(worst_orth, float(orth))
    ok = worst_res <= 1e-10 and worst_orth <= 1e-10
    return ok, f"max residual {worst_res:.3e}, max orthonormality {worst_orth:.3e}"


def check_forward_enumeration() -> tuple[bool, str]:
    """Forward log-likelihood equals the exhaustive path sum."""
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(15):
        n_states = int(rng.integers(1, 4))
        t_len = int(rng.integers(1, 7))
        model = _random_model(rng, n_states, int(rng.integers(1, 3)))
        obs = rng.normal(size=(t_len, model.n_dims))
        a = hmm.log_forward(model, obs)
        b = oracles.enumerate_log_likelihood(model, obs)
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    return worst <= 1e-12, f"max relative error = {worst:.3e}"


def check_viterbi_enumeration() -> tuple[bool, str]:
    """Viterbi path probability equals the exhaustive maximum."""
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(15):
        n_states = int(rng.integers(1, 4))
        t_len = int(rng.integers(1, 7))
        model = _random_model(rng, n_states, 1)
        obs = rng.normal(size=(t_len, 1))
        path = hmm.viterbi(model, obs)
        _, best_lp = oracles.enumerate_best_path(model, obs)
        worst = max(worst, abs(oracles.path_log_prob(model, obs, path) - best_lp))
    return worst <= 1e-10, f"max |path logprob - enumerated max| = {worst:.3e}"


def check_em_monotone() -> tuple[bool, str]:
    """Log-likelihood traces never decrease beyond 1e-9."""
    rng = np.random.default_rng(505)
    worst = 0.0
    for seed in range(10):
        obs, _ = sample_gaussian_chain(
            seed,
            means=rng.normal(scale=0.05, size=(2, 2)),
            sigmas=np.full((2, 2), 0.02),
            trans=np.array([[0.9, 0.1], [0.2, 0.8]]),
            n=300,
        )
        fit = hmm.baum_welch(obs, int(rng.integers(2, 5)))
        if fit.ll_trace.size > 1:
            worst = min(worst, float(np.diff(fit.ll_trace).min()))
    return worst >= -1e-9, f"most negative trace step = {worst:.3e}"


def check_forecast_monte_carlo() -> tuple[bool, str]:
    """Closed-form one-step forecast within 3 SE of transition sampling."""
    rng = np.random.default_rng(606)
    worst = 0.0
    for trial in range(5):
        model = _random_model(rng, int(rng.integers(2, 5)), 2)
        state = int(rng.integers(model.n_states))
        closed = model.trans[state] @ model.means
        est, se = oracles.monte_carlo_factor_forecast(
            model, state, n_draws=200_000, seed=700 + trial
        )
        z = np.max(np.abs(est - closed) / np.maximum(se, 1e-300))
        worst = max(worst, float(z))
    return worst <= 3.0, f"max |z| over draws = {worst:.2f} (limit 3)"


def check_regime_recovery() -> tuple[bool, str]:
    """EM recovers a well-separated two-state chain from simulation."""
    ok = 0
    for seed in range(5):
        obs, _ = sample_gaussian_chain(
            seed,
            means=np.array([[0.05], [-0.05]]),
            sigmas=np.array([[0.01], [0.01]]),
            trans=np.array([[0.95, 0.05], [0.05, 0.95]]),
            n=2000,
        )
        fit = hmm.baum_welch(obs, 2)
        m = fit.model.means.ravel()
        order = np.argsort(-m)
        diag = np.array([fit.model.trans[i, i] for i in order])
        if np.all(np.abs(m[order] - [0.05, -0.05]) <= 0.005) and np.all(
            np.abs(diag - 0.95) <= 0.05
        ):
            ok += 1
    return ok >= 4, f"recovered ground truth in {ok}/5 seeds"


CHECKS = (
    ("eigen-charpoly-roots", "linalg", check_eigen_charpoly),
    ("eigen-reconstruction", "linalg", check_eigen_reconstruction),
    ("forward-vs-enumeration", "hmm", check_forward_enumeration),
    ("viterbi-vs-enumeration", "hmm", check_viterbi_enumeration),
    ("em-monotone-likelihood", "hmm", check_em_monotone),
    ("forecast-monte-carlo", "forecast", check_forecast_monte_carlo),
    ("regime-recovery", "hmm", check_regime_recovery),
)


def run_selftests(module_filter: str | None = None) -> list[CheckOutcome]:
    outcomes = []
    for name, module, fn in CHECKS:
        if module_filter and module_filter not in (module, name):
            continue
        start = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        outcomes.append(
            CheckOutcome(
                name=name,
                module=module,
                passed=passed,
                detail=detail,
                seconds=time.perf_counter() - start,
            )
        )
    return outcomes
