"""State transition matrices of x' = A(t)x and the associated Gramians.

For a base time t_i the forward factor Phi(t, t_i) solves dPhi/dt = A(t)Phi,
Phi(t_i, t_i) = I.  The reverse factor Phi(t_i, t) is computed from its own
differential relation d/dt Phi(t_i, t) = -Phi(t_i, t) A(t) rather than by
pointwise inversion, which would amplify error inside Gramian integrands.
Arbitrary arguments combine through the base: Phi(t, s) = Phi(t, t_i) Phi(t_i, s).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import linalg, ode
from .expr import MatrixFunction

__all__ = [
    "GramianError",
    "TransitionOperator",
    "build_transition",
    "gramian_S",
    "controllability_gramian_W",
    "ControllabilityResult",
]


class GramianError(RuntimeError):
    """A Gramian that is positive definite in exact arithmetic failed the
    numerical PD test."""


class TransitionOperator:
    """Transition matrices of x' = A(t)x over a working interval [t_i, t_j],
    anchored at base time t_i."""

    __slots__ = ("A", "n", "t_base", "t_hi", "_fwd", "_bwd")

    def __init__(self, A: MatrixFunction, t_base: float, t_hi: float,
                 fwd: ode.MatrixTrajectory, bwd: ode.MatrixTrajectory):
        self.A = A
        self.n = A.shape[0]
        self.t_base = float(t_base)
        self.t_hi = float(t_hi)
        self._fwd = fwd
        self._bwd = bwd

    def forward(self, t: float) -> np.ndarray:
        """Phi(t, t_base)."""
        return self._fwd(t)

    def backward(self, t: float) -> np.ndarray:
        """Phi(t_base, t)."""
        return self._bwd(t)

    def phi(self, t: float, s: float) -> np.ndarray:
        """Phi(t, s) for any t, s in the working interval."""
        return self.forward(t) @ self.backward(s)

    @property
    def mesh(self) -> np.ndarray:
        """Accepted step times of the forward integration."""
        return self._fwd.ts


def build_transition(
    A: MatrixFunction,
    t_i: float,
    t_j: float,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
) -> TransitionOperator:
    """Integrate both transition factors of x' = A(t)x over [t_i, t_j]."""
    if not t_i < t_j:
        raise ValueError(f"need t_i < t_j, got [{t_i}, {t_j}]")
    n, m = A.shape
    if n != m:
        raise ValueError(f"A must be square, got shape {A.shape}")
    eye = np.eye(n)

    fwd = ode.integrate_matrix(lambda t, Y: A(t) @ Y, eye, t_i, t_j, rtol, atol)
    bwd = ode.integrate_matrix(lambda t, Y: -(Y @ A(t)), eye, t_i, t_j, rtol, atol)
    return TransitionOperator(A, t_i, t_j, fwd, bwd)


def gramian_S(
    T: TransitionOperator,
    t_i: float,
    t_ip1: float,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
) -> np.ndarray:
    """Segment Gramian: the integral of Phi(t_base, s) Phi(t_base, s)^T over
    [t_i, t_ip1], symmetrized.

    The integrand is a Gram integrand of invertible matrices, so the result
    is positive definite in exact arithmetic; a failed numerical PD test
    raises GramianError.
    """
    def integrand(s: float) -> np.ndarray:
        P = T.backward(s)
        return P @ P.T

    S = ode.quadrature(integrand, t_i, t_ip1, rtol, atol)
    S = 0.5 * (S + S.T)
    ok, _ = linalg.cholesky_pd(S)
    if not ok:
        raise GramianError(
            f"segment Gramian on [{t_i}, {t_ip1}] failed the positive-definiteness test"
        )
    return S


class ControllabilityResult(NamedTuple):
    W: np.ndarray
    is_controllable: bool


def controllability_gramian_W(
    A: MatrixFunction,
    B: MatrixFunction,
    tau0: float,
    tau1: float,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
) -> ControllabilityResult:
    """Kalman controllability Gramian over the window [tau0, tau1]:
    W = integral of Phi(tau0, s) B(s) B(s)^T Phi(tau0, s)^T ds, with the
    positive-definite verdict attached."""
    if not tau0 < tau1:
        raise ValueError(f"need tau0 < tau1, got [{tau0}, {tau1}]")
    T = build_transition(A, tau0, tau1, rtol, atol)

    def integrand(s: float) -> np.ndarray:
        P = T.backward(s)
        Bs = B(s)
        M = P @ Bs
        return M @ M.T

    W = ode.quadrature(integrand, tau0, tau1, rtol, atol)
    W = 0.5 * (W + W.T)
    ok, _ = linalg.cholesky_pd(W)
    return ControllabilityResult(W, bool(ok))
