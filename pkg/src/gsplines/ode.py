"""Adaptive explicit Runge-Kutta integration with dense output.

Thin layer over scipy's DOP853 (an embedded explicit pair with a high-order
interpolant), exposing the trajectory abstraction the rest of the package
works with: an immutable object evaluable anywhere on the integration span,
exact at accepted mesh points.  Quadrature is integration of the augmented
system Y' = integrand(t), Y(t0) = 0, so matrix integrals share the same
error controller.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "IntegrationError",
    "DenseTrajectory",
    "MatrixTrajectory",
    "integrate",
    "integrate_matrix",
    "quadrature",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12

_METHOD = "DOP853"

# Slack for evaluating at the span endpoints after roundoff in callers.
_DOMAIN_SLACK = 1e-12


class IntegrationError(RuntimeError):
    """Integrator failure: step-size underflow (stiffness/blow-up) or a
    non-finite state."""


class DenseTrajectory:
    """Solution of an ODE on [t_start, t_end] (possibly reversed), evaluable
    at any interior time.

    Evaluation at an accepted mesh point returns the stored state exactly;
    elsewhere the embedded pair's interpolant is used.
    """

    __slots__ = ("t_start", "t_end", "ts", "ys", "_sol", "_lo", "_hi", "_ts_asc", "_reversed")

    def __init__(self, t_start: float, t_end: float, ts: np.ndarray, ys: np.ndarray, sol):
        self.t_start = float(t_start)
        self.t_end = float(t_end)
        self.ts = ts
        self.ys = ys
        self._sol = sol
        # ts is monotone in integration order; keep an ascending view for
        # mesh lookups.
        self._reversed = bool(ts[0] > ts[-1])
        self._ts_asc = ts[::-1] if self._reversed else ts
        lo, hi = min(t_start, t_end), max(t_start, t_end)
        slack = _DOMAIN_SLACK * max(hi - lo, 1.0)
        self._lo = lo - slack
        self._hi = hi + slack

    @property
    def dim(self) -> int:
        return self.ys.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        if not (self._lo <= t <= self._hi):
            raise ValueError(
                f"t={t!r} outside trajectory span [{self.t_start!r}, {self.t_end!r}]"
            )
        # Exact mesh hits return the accepted state itself.
        idx = int(np.searchsorted(self._ts_asc, t))
        for k in (idx - 1, idx):
            if 0 <= k < len(self._ts_asc) and self._ts_asc[k] == t:
                col = len(self.ts) - 1 - k if self._reversed else k
                return self.ys[:, col].copy()
        return np.asarray(self._sol(t), dtype=float)

    def values(self, ts) -> np.ndarray:
        """Evaluate at many times; returns an array of shape (dim, len(ts))."""
        ts = np.asarray(ts, dtype=float)
        out = np.empty((self.dim, ts.size), dtype=float)
        for i, t in enumerate(ts.ravel()):
            out[:, i] = self(t)
        return out

    @property
    def end_state(self) -> np.ndarray:
        return self.ys[:, -1].copy()


def integrate(
    field: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t0: float,
    t1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> DenseTrajectory:
    """Integrate y' = field(t, y) from t0 to t1 (t1 < t0 integrates backward).

    Raises IntegrationError when the step controller gives up or the state
    leaves the finite range.
    """
    if t0 == t1:
        raise ValueError("degenerate integration span: t0 == t1")
    y0 = np.asarray(y0, dtype=float)
    result = solve_ivp(
        field,
        (float(t0), float(t1)),
        y0,
        method=_METHOD,
        rtol=rtol,
        atol=atol,
        dense_output=True,
    )
    if not result.success:
        raise IntegrationError(f"integration failed on [{t0}, {t1}]: {result.message}")
    if not np.all(np.isfinite(result.y)):
        raise IntegrationError(f"non-finite state produced on [{t0}, {t1}]")
    return DenseTrajectory(t0, t1, result.t, result.y, result.sol)


class MatrixTrajectory:
    """Matrix-valued trajectory, stored flattened inside a DenseTrajectory."""

    __slots__ = ("traj", "shape")

    def __init__(self, traj: DenseTrajectory, shape: tuple[int, int]):
        self.traj = traj
        self.shape = shape

    def __call__(self, t: float) -> np.ndarray:
        return self.traj(t).reshape(self.shape)

    @property
    def t_start(self) -> float:
        return self.traj.t_start

    @property
    def t_end(self) -> float:
        return self.traj.t_end

    @property
    def ts(self) -> np.ndarray:
        return self.traj.ts


def integrate_matrix(
    field: Callable[[float, np.ndarray], np.ndarray],
    Y0: np.ndarray,
    t0: float,
    t1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> MatrixTrajectory:
    """Integrate a matrix ODE Y' = field(t, Y) by flattening to one vector."""
    Y0 = np.asarray(Y0, dtype=float)
    shape = Y0.shape

    def flat_field(t, y):
        return np.asarray(field(t, y.reshape(shape)), dtype=float).ravel()

    traj = integrate(flat_field, Y0.ravel(), t0, t1, rtol, atol)
    return MatrixTrajectory(traj, shape)


def quadrature(
    integrand: Callable[[float], np.ndarray],
    t0: float,
    t1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> np.ndarray:
    """Integral of a matrix/vector/scalar-array integrand over [t0, t1],
    via the adaptive controller on Y' = integrand(t)."""
    probe = np.asarray(integrand(float(t0)), dtype=float)
    shape = probe.shape

    def field(t, _y):
        return np.asarray(integrand(t), dtype=float).ravel()

    traj = integrate(field, np.zeros(probe.size), t0, t1, rtol, atol)
    return traj.end_state.reshape(shape)
