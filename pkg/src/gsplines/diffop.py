"""Linear matrix differential operators in normal form.

An operator of order q acting on R^n-valued functions is stored as

    L f = sign * f^(q) + C_{q-1}(t) f^(q-1) + ... + C_0(t) f

with sign in {+1, -1} and symbolic coefficient matrices C_k.  Two
construction conventions are supported: the scalar form D^p + a_{p-1} D^{p-1}
+ ... + a_0 and the matrix form D^p - A_{p-1} D^{p-1} - ... - A_0.  Adjoints
and compositions are expanded back to normal form with the Leibniz rule,
using exact symbolic derivatives of the coefficients, so the results stay
closed under the representation (the leading coefficient of any adjoint or
composition of such operators is again +/-I).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable, Sequence

import numpy as np

from .expr import Const, MatrixFunction, as_expr

__all__ = [
    "LinearDiffOperator",
    "scalar_operator",
    "matrix_operator",
    "derivative_operator",
    "first_order_operator",
    "adjoint",
    "compose",
    "apply_operator",
    "companion_reduction",
]

SCALAR = "scalar"
MATRIX = "matrix"


@dataclass(frozen=True)
class LinearDiffOperator:
    """Normal-form operator sign*D^q + sum_k C_k(t) D^k, k < q."""

    order: int
    dim: int
    leading_sign: int
    coeffs: tuple[MatrixFunction, ...]  # C_0 .. C_{q-1}
    convention: str = MATRIX

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("operator order must be >= 1")
        if self.leading_sign not in (1, -1):
            raise ValueError("leading sign must be +1 or -1")
        if len(self.coeffs) != self.order:
            raise ValueError(
                f"expected {self.order} coefficients for D^0..D^{self.order - 1}, "
                f"got {len(self.coeffs)}"
            )
        for k, C in enumerate(self.coeffs):
            if C.shape != (self.dim, self.dim):
                raise ValueError(f"coefficient {k} has shape {C.shape}, expected "
                                 f"({self.dim}, {self.dim})")

    def coefficient(self, k: int) -> MatrixFunction:
        """Normal-form coefficient of D^k, including the leading one."""
        if k == self.order:
            return MatrixFunction.identity(self.dim).scale(self.leading_sign)
        return self.coeffs[k]

    def full_coeffs(self) -> list[MatrixFunction]:
        return [self.coefficient(k) for k in range(self.order + 1)]


def scalar_operator(lower_coeffs: Sequence) -> LinearDiffOperator:
    """Scalar convention: D^p + a_{p-1} D^{p-1} + ... + a_0 from the list
    [a_0, ..., a_{p-1}] of expressions (strings, numbers, or TimeExpr)."""
    coeffs = tuple(MatrixFunction([[as_expr(a)]]) for a in lower_coeffs)
    return LinearDiffOperator(len(coeffs), 1, 1, coeffs, convention=SCALAR)


def matrix_operator(lower_coeffs: Sequence[MatrixFunction]) -> LinearDiffOperator:
    """Matrix convention: D^p - A_{p-1} D^{p-1} - ... - A_0 from the list
    [A_0, ..., A_{p-1}]."""
    if not lower_coeffs:
        raise ValueError("need at least A_0")
    dim = lower_coeffs[0].shape[0]
    coeffs = tuple(-A for A in lower_coeffs)
    return LinearDiffOperator(len(coeffs), dim, 1, coeffs, convention=MATRIX)


def derivative_operator(p: int, dim: int = 1, convention: str = SCALAR) -> LinearDiffOperator:
    """The pure derivative D^p in dimension dim."""
    zeros = tuple(MatrixFunction.zeros(dim) for _ in range(p))
    return LinearDiffOperator(p, dim, 1, zeros, convention=convention)


def first_order_operator(A: MatrixFunction) -> LinearDiffOperator:
    """L = D - A(t), the operator turning x' = A x + B u into L x = B u."""
    return matrix_operator([A])


def adjoint(L: LinearDiffOperator) -> LinearDiffOperator:
    """Formal adjoint under the L2 inner product.

    With L = sum_k C_k D^k (C_q = sign*I), integration by parts gives
    L* f = sum_k (-1)^k D^k (C_k(t)^T f); Leibniz expansion back to normal
    form yields coefficients

        C*_j = sum_{k >= j} (-1)^k binom(k, k-j) d^{k-j}/dt^{k-j} (C_k^T).
    """
    q = L.order
    full = L.full_coeffs()
    # transposed coefficients and their derivatives up to order q
    transposed: list[list[MatrixFunction]] = []
    for C in full:
        derivs = [C.transpose()]
        for _ in range(q):
            derivs.append(derivs[-1].diff())
        transposed.append(derivs)

    new_full: list[MatrixFunction] = []
    for j in range(q + 1):
        acc = MatrixFunction.zeros(L.dim)
        for k in range(j, q + 1):
            term = transposed[k][k - j].scale((-1) ** k * comb(k, k - j))
            acc = acc + term
        new_full.append(acc)

    sign = _leading_sign(new_full[q], L.dim)
    return LinearDiffOperator(q, L.dim, sign, tuple(new_full[:q]),
                              convention=L.convention)


def compose(L1: LinearDiffOperator, L2: LinearDiffOperator) -> LinearDiffOperator:
    """Operator composition L1 L2 expanded to normal form.

    Each term M_k D^k of L1 applied to N_j D^j of L2 contributes
    binom(k, i) M_k N_j^{(i)} D^{k-i+j} for i = 0..k.
    """
    if L1.dim != L2.dim:
        raise ValueError(f"dimension mismatch: {L1.dim} vs {L2.dim}")
    dim = L1.dim
    q1, q2 = L1.order, L2.order
    M = L1.full_coeffs()
    N = L2.full_coeffs()

    # derivatives N_j^{(i)} for i up to q1
    N_derivs: list[list[MatrixFunction]] = []
    for Nj in N:
        derivs = [Nj]
        for _ in range(q1):
            derivs.append(derivs[-1].diff())
        N_derivs.append(derivs)

    new_full = [MatrixFunction.zeros(dim) for _ in range(q1 + q2 + 1)]
    for k in range(q1 + 1):
        for i in range(k + 1):
            factor = comb(k, i)
            for j in range(q2 + 1):
                m = k - i + j
                term = (M[k] @ N_derivs[j][i]).scale(factor)
                new_full[m] = new_full[m] + term

    order = q1 + q2
    sign = _leading_sign(new_full[order], dim)
    return LinearDiffOperator(order, dim, sign, tuple(new_full[:order]),
                              convention=L1.convention)


def _leading_sign(C: MatrixFunction, dim: int) -> int:
    """The leading coefficient of adjoints/compositions of normal-form
    operators folds to a constant +/-I; extract the sign or fail loudly."""
    for i, row in enumerate(C.entries):
        for j, e in enumerate(row):
            if i == j:
                if not (isinstance(e, Const) and e.value in (1.0, -1.0)):
                    raise ValueError(f"leading coefficient is not +/-I: entry {i},{j} = {e}")
            else:
                if not (isinstance(e, Const) and e.value == 0.0):
                    raise ValueError(f"leading coefficient is not +/-I: entry {i},{j} = {e}")
    first = C.entries[0][0]
    assert isinstance(first, Const)
    return int(first.value)


def apply_operator(
    L: LinearDiffOperator,
    f: Callable[[float, int], np.ndarray],
    t: float,
) -> np.ndarray:
    """Evaluate (L f)(t) where f(t, k) supplies the k-th derivative of f at t
    for k = 0..order."""
    out = L.leading_sign * np.asarray(f(t, L.order), dtype=float)
    for k in range(L.order):
        out = out + L.coeffs[k](t) @ np.asarray(f(t, k), dtype=float)
    return out


def companion_reduction(L: LinearDiffOperator) -> MatrixFunction:
    """First-order companion matrix F(t) of the homogeneous equation L x = 0.

    For z = (x, x', ..., x^(q-1)) the equation is z' = F(t) z, with identity
    shift blocks and last block row -sign * C_k (sign^2 = 1 folds the
    inverse of the leading coefficient).
    """
    q, n = L.order, L.dim
    size = q * n
    rows = [[Const(0.0) for _ in range(size)] for _ in range(size)]
    for b in range(q - 1):
        for i in range(n):
            rows[b * n + i][(b + 1) * n + i] = Const(1.0)
    for k in range(q):
        Ck = L.coeffs[k]
        for i in range(n):
            for j in range(n):
                entry = Ck.entries[i][j]
                rows[(q - 1) * n + i][k * n + j] = (-L.leading_sign) * entry
    return MatrixFunction(rows)
