"""Closed-form solution of one minimum-energy segment problem.

On [t_i, t_{i+1}] with pinned endpoints, the minimizer of the control energy
integral of ||B(t)u(t)||^2 subject to x' = A(t)x + B(t)u is recovered from
the transition matrix: the initial costate is

    psi_i = S^{-1} (Phi(t_i, t_{i+1}) x_{i+1} - x_i),

with S the segment Gramian, and then psi(t) = Phi(t_i, t)^T psi_i,
u(t) = B(t)^{-1} psi(t), and the state follows the forced equation
x' = A(t)x + Phi(t_i, t)^T psi_i.  The optimal cost has the closed form
(Phi(t_i,t_{i+1}) x_{i+1} - x_i)^T S^{-1} (Phi(t_i,t_{i+1}) x_{i+1} - x_i).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg, ode, transition
from .expr import MatrixFunction

__all__ = [
    "SingularControlError",
    "SegmentProblem",
    "SegmentSolution",
    "PerturbationReport",
    "solve_segment",
    "segment_cost_quadrature",
    "perturbation_check",
]

# Extra uniform sample count for certifying that B(t) stays nonsingular.
_B_CHECK_SAMPLES = 100


class SingularControlError(RuntimeError):
    """B(t) failed the nonsingularity check at some sampled time."""


@dataclass(frozen=True)
class SegmentProblem:
    A: MatrixFunction
    B: MatrixFunction
    t_start: float
    t_end: float
    x_start: np.ndarray
    x_end: np.ndarray

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape != (n, n):
            raise ValueError("A and B must be square with matching dimension")
        if not self.t_start < self.t_end:
            raise ValueError(f"need t_start < t_end, got [{self.t_start}, {self.t_end}]")
        object.__setattr__(self, "x_start", np.asarray(self.x_start, dtype=float))
        object.__setattr__(self, "x_end", np.asarray(self.x_end, dtype=float))
        for name, x in (("x_start", self.x_start), ("x_end", self.x_end)):
            if x.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {x.shape}")
            if not np.all(np.isfinite(x)):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def dim(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class SegmentSolution:
    """Solved segment with evaluators for x, u, psi on [t_start, t_end]."""

    problem: SegmentProblem
    transition_op: transition.TransitionOperator
    S: np.ndarray
    psi_start: np.ndarray
    cost: float
    _xtraj: ode.DenseTrajectory = field(repr=False)

    @property
    def t_start(self) -> float:
        return self.problem.t_start

    @property
    def t_end(self) -> float:
        return self.problem.t_end

    def x(self, t: float) -> np.ndarray:
        return self._xtraj(t)

    def psi(self, t: float) -> np.ndarray:
        return self.transition_op.backward(t).T @ self.psi_start

    def u(self, t: float) -> np.ndarray:
        return linalg.lu_solve(self.problem.B(t), self.psi(t))

    def control_effort(self, t: float) -> np.ndarray:
        """B(t) u(t), the quantity whose squared norm is the running cost."""
        return self.problem.B(t) @ self.u(t)


def _check_B_nonsingular(p: SegmentProblem, sample_times: np.ndarray) -> None:
    # Nonsingularity is certified pointwise: at the integrator's accepted
    # mesh plus a uniform sweep; a continuous certificate is not available
    # numerically.
    for t in sample_times:
        try:
            linalg.lu_solve(p.B(float(t)), np.zeros(p.dim))
        except linalg.SingularMatrixError as exc:
            raise SingularControlError(
                f"B(t) is numerically singular at t={float(t):.6g}: {exc}"
            ) from exc


def solve_segment(
    p: SegmentProblem,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
    *,
    costate_override: np.ndarray | None = None,
) -> SegmentSolution:
    """Solve one segment problem.

    costate_override replaces the computed psi(t_i); it exists for fault
    injection in verification tests and must be None in normal use.
    """
    T = transition.build_transition(p.A, p.t_start, p.t_end, rtol, atol)

    uniform = np.linspace(p.t_start, p.t_end, _B_CHECK_SAMPLES)
    _check_B_nonsingular(p, np.concatenate([T.mesh, uniform]))

    S = transition.gramian_S(T, p.t_start, p.t_end, rtol, atol)
    rhs = T.backward(p.t_end) @ p.x_end - p.x_start
    psi_start = linalg.lu_solve(S, rhs)
    cost = float(rhs @ psi_start)
    if costate_override is not None:
        psi_start = np.asarray(costate_override, dtype=float)

    def forced_field(t: float, x: np.ndarray) -> np.ndarray:
        return p.A(t) @ x + T.backward(t).T @ psi_start

    xtraj = ode.integrate(forced_field, p.x_start, p.t_start, p.t_end, rtol, atol)
    return SegmentSolution(p, T, S, psi_start, cost, xtraj)


def segment_cost_quadrature(
    s: SegmentSolution,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
) -> float:
    """Control energy by direct quadrature of ||B(t)u(t)||^2; cross-checks
    the closed-form cost."""
    def integrand(t: float) -> np.ndarray:
        v = s.control_effort(t)
        return np.array([v @ v])

    return float(ode.quadrature(integrand, s.t_start, s.t_end, rtol, atol)[0])


@dataclass(frozen=True)
class PerturbationReport:
    trials: int
    seed: int
    base_cost: float
    trial_costs: np.ndarray
    tolerance: float
    violations: tuple[int, ...]

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def min_excess(self) -> float:
        """Smallest perturbed-cost margin over the base cost."""
        return float(np.min(self.trial_costs) - self.base_cost)


def perturbation_check(
    s: SegmentSolution,
    trials: int,
    seed: int,
    cost_rtol: float = 1e-7,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
) -> PerturbationReport:
    """Optimality spot-check against random admissible perturbations.

    Each trial perturbs the state by a smooth bump eta vanishing at both
    endpoints, eta(t) = sin(pi*s)(w0 + w1 sin(2*pi*s)) with s the normalized
    time and seeded Gaussian w's.  The corresponding admissible control is
    u~ = B^{-1}(x~' - A x~), whose effort is B u~ = psi + eta' - A eta, and
    its quadrature cost must not undercut the closed-form optimum beyond
    cost_rtol * (1 + cost).
    """
    p = s.problem
    n = p.dim
    dt = s.t_end - s.t_start
    rng = np.random.default_rng(seed)
    W0 = rng.standard_normal((trials, n))
    W1 = rng.standard_normal((trials, n))
    pi_over = np.pi / dt

    def integrand(t: float) -> np.ndarray:
        tau = (t - s.t_start) / dt
        s1, c1 = np.sin(np.pi * tau), np.cos(np.pi * tau)
        s2, c2 = np.sin(2 * np.pi * tau), np.cos(2 * np.pi * tau)
        eta = s1 * (W0 + s2 * W1)                                   # (trials, n)
        eta_dot = pi_over * c1 * (W0 + s2 * W1) + s1 * (2 * pi_over * c2) * W1
        effort = s.psi(t)[None, :] + eta_dot - eta @ p.A(t).T
        return np.einsum("ij,ij->i", effort, effort)

    costs = ode.quadrature(integrand, s.t_start, s.t_end, rtol, atol)
    tol = cost_rtol * (1.0 + abs(s.cost))
    violations = tuple(int(i) for i in np.nonzero(costs < s.cost - tol)[0])
    return PerturbationReport(trials, seed, s.cost, costs, tol, violations)
