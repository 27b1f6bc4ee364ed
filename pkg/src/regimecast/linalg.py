"""Dense symmetric eigendecomposition via cyclic Jacobi rotations.

The solver is deliberately self-contained and bit-deterministic:
identical input bits always produce identical output bits, on any
machine, because the rotation order is fixed (row-cyclic) and every
operation is plain IEEE-754 double arithmetic. That property is what
the rolling backtest leans on for reproducible reports.

Scope is intentionally narrow: real symmetric matrices only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceFailure, InvalidMatrix

MAX_SWEEPS = 100
OFFDIAG_RTOL = 1e-12  # relative to the Frobenius norm of the input


@dataclass(frozen=True)
class SymMatrix:
    """A finite real symmetric matrix.

    Construction symmetrizes the input as (A + A^T)/2, so callers may
    pass anything square; asymmetry beyond roundoff is silently folded.
    """

    entries: np.ndarray

    def __init__(self, entries):
        a = np.asarray(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidMatrix(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidMatrix("matrix contains non-finite entries")
        a = (a + a.T) / 2.0
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending, paired column eigenvectors.

    ``eigenvectors[:, i]`` belongs to ``eigenvalues[i]``. Columns are
    orthonormal and sign-fixed: the largest-magnitude entry of each
    column is positive (ties resolved to the lowest row index).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@njit(cache=True)
def _jacobi_sweeps(a, vt, tol, max_sweeps):
    """Row-cyclic Jacobi on ``a`` in place.

    Rotations accumulate in ``vt`` TRANSPOSED (row i of vt is the i-th
    eigenvector candidate) so the hot loops touch contiguous memory.
    Returns (sweeps_used, final_offdiagonal_frobenius); stops once the
    off-diagonal Frobenius norm drops to ``tol``.
    """
    n = a.shape[0]
    sweeps = 0
    off = 0.0
    for p in range(n):
        for q in range(p + 1, n):
            off += 2.0 * a[p, q] * a[p, q]
    off = np.sqrt(off)
    # Safe to skip pivots this small: even if every pair sat exactly at the
    # threshold, the remaining off-diagonal norm would still be <= tol.
    skip = tol / np.sqrt(n * (n - 1) + 1.0)
    while sweeps < max_sweeps and off > tol:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if np.abs(apq) <= skip:
                    continue
                # Stable rotation angle (Golub & Van Loan, sym. Schur 2x2)
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                app = a[p, p]
                aqq = a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    if i != p and i != q:
                        aip = a[p, i]
                        aiq = a[q, i]
                        a[p, i] = c * aip - s * aiq
                        a[q, i] = s * aip + c * aiq
                for i in range(n):
                    if i != p and i != q:
                        a[i, p] = a[p, i]
                        a[i, q] = a[q, i]
                for i in range(n):
                    vip = vt[p, i]
                    viq = vt[q, i]
                    vt[p, i] = c * vip - s * viq
                    vt[q, i] = s * vip + c * viq
        sweeps += 1
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        off = np.sqrt(off)
    return sweeps, off


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-|entry| is positive.

    np.argmax returns the first maximum, which implements the
    lowest-index tie rule.
    """
    flipped = vectors.copy()
    for j in range(flipped.shape[1]):
        col = flipped[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0.0:
            flipped[:, j] = -col
    return flipped


def sym_eig(m: SymMatrix) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix.

    Eigenvalues come back in non-increasing order; repeated values keep
    the order the sweep produced them in (stable sort). Raises
    ConvergenceFailure with the residual if the sweep cap is hit, which
    for symmetric input should never happen in practice.
    """
    a = np.array(m.entries, dtype=np.float64)  # working copy, mutated in place
    n = a.shape[0]
    if n == 1:
        return EigenDecomposition(
            eigenvalues=a[0].copy(), eigenvectors=np.ones((1, 1))
        )
    tol = OFFDIAG_RTOL * np.linalg.norm(m.entries, "fro")
    vt = np.eye(n)
    sweeps, off = _jacobi_sweeps(a, vt, tol, MAX_SWEEPS)
    if off > tol:
        raise ConvergenceFailure(
            f"Jacobi sweep cap {MAX_SWEEPS} hit; off-diagonal residual {off:.3e} "
            f"exceeds tolerance {tol:.3e}"
        )
    diag = np.diag(a).copy()
    order = np.argsort(-diag, kind="stable")
    values = diag[order]
    vectors = _fix_signs(vt.T[:, order])
    values.flags.writeable = False
    vectors.flags.writeable = False
    return EigenDecomposition(eigenvalues=values, eigenvectors=vectors)
