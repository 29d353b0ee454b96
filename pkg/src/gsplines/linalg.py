"""Small dense linear algebra with explicit failure semantics.

Matrices and vectors are plain float ndarrays.  Solves go through
partial-pivoted LU with a pivot threshold; positive definiteness is tested by
an unpivoted Cholesky with a trace-scaled pivot floor.  Sizes here are tiny
(n of order 10), so robustness wins over speed everywhere.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = ["SingularMatrixError", "lu_solve", "cholesky_pd", "norm_inf"]

# Pivot magnitudes below these thresholds are treated as rank deficiency.
LU_PIVOT_RTOL = 1e-12
CHOLESKY_PIVOT_RTOL = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def norm_inf(M: np.ndarray) -> float:
    """Max absolute row sum (the induced infinity norm); max|v| for vectors."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        return float(np.max(np.abs(M))) if M.size else 0.0
    return float(np.max(np.sum(np.abs(M), axis=1)))


def lu_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve M x = rhs by LU with partial pivoting.

    Raises SingularMatrixError when any pivot magnitude falls below
    1e-12 * ||M||_inf.  rhs may be a vector or a matrix of columns.
    """
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    threshold = LU_PIVOT_RTOL * norm_inf(M)
    pivots = np.abs(np.diag(lu))
    if M.shape[0] and pivots.min() <= threshold:
        raise SingularMatrixError(
            f"singular matrix: pivot {pivots.min():.3e} below threshold {threshold:.3e}"
        )
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


def cholesky_pd(M: np.ndarray, sym_rtol: float = 1e-10):
    """Positive-definiteness test via Cholesky.

    The input must be symmetric to within sym_rtol * ||M||_inf; it is
    symmetrized before factoring (quadrature output carries roundoff-level
    asymmetry).  Returns (True, L) with M ~= L L^T when every pivot exceeds
    1e-12 * trace(M)/n, else (False, None).  Never raises on indefinite
    input.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = norm_inf(M)
    if norm_inf(M - M.T) > sym_rtol * max(scale, 1.0):
        raise ValueError("matrix is not symmetric to tolerance")
    A = 0.5 * (M + M.T)
    n = A.shape[0]
    floor = CHOLESKY_PIVOT_RTOL * np.trace(A) / n
    L = np.zeros_like(A)
    for j in range(n):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= floor or pivot <= 0.0:
            return False, None
        L[j, j] = np.sqrt(pivot)
        for i in range(j + 1, n):
            L[i, j] = (A[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return True, L
