"""Assembly of the full waypoint problem from independent segment solutions,
plus residual-based verification.

The waypoint problem pins the whole state at every knot, so it decomposes
into independent segment problems; the assembled spline is their ordered
concatenation.  The state is continuous across knots by construction while
the control and costate may jump, so their evaluators default to left limits
at interior knots with explicit one-sided access.

verify() recomputes everything a solution claims, from the outside:
interpolation at the knots, the stationarity identity psi = B u, the costate
equation psi' = -A^T psi (psi' by finite differences of the dense output),
the second-order equation x'' + (A^T - A)x' - (A^T A + A')x = 0 with exact
symbolic coefficients, and the closed-form cost against direct quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg, ode, transition
from .diffop import adjoint, apply_operator, compose, first_order_operator
from .expr import MatrixFunction
from .lqsegment import (
    SegmentProblem,
    SegmentSolution,
    SingularControlError,
    segment_cost_quadrature,
    solve_segment,
)

_SEGMENT_ERRORS = (ode.IntegrationError, linalg.SingularMatrixError,
                   transition.GramianError, SingularControlError)

__all__ = [
    "HypothesisViolation",
    "ProblemP",
    "GeneralizedSpline",
    "ToleranceProfile",
    "PROFILES",
    "SegmentResiduals",
    "VerificationReport",
    "solve_problem_p",
    "verify",
]


class HypothesisViolation(RuntimeError):
    """One of the standing hypotheses failed: nonsingular B (H1) or complete
    controllability (H2)."""

    def __init__(self, hypothesis: str, message: str):
        super().__init__(f"{hypothesis}: {message}")
        self.hypothesis = hypothesis


@dataclass(frozen=True)
class ProblemP:
    """Waypoint problem: x' = A(t)x + B(t)u, state pinned at every knot."""

    A: MatrixFunction
    B: MatrixFunction
    knots: np.ndarray
    waypoints: np.ndarray

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape != (n, n):
            raise ValueError("A and B must be square with matching dimension")
        knots = np.asarray(self.knots, dtype=float)
        waypoints = np.asarray(self.waypoints, dtype=float)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "waypoints", waypoints)
        if len(knots) < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if waypoints.shape != (len(knots), n):
            raise ValueError(
                f"waypoints must have shape ({len(knots)}, {n}), got {waypoints.shape}"
            )
        if not np.all(np.isfinite(waypoints)):
            raise ValueError("waypoints must be finite")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def segments(self) -> int:
        return len(self.knots) - 1

    def segment_problem(self, i: int) -> SegmentProblem:
        return SegmentProblem(self.A, self.B, float(self.knots[i]),
                              float(self.knots[i + 1]),
                              self.waypoints[i], self.waypoints[i + 1])


class GeneralizedSpline:
    """Concatenated segment solutions over the partition."""

    __slots__ = ("problem", "segments", "total_cost")

    def __init__(self, problem: ProblemP, segments: tuple[SegmentSolution, ...]):
        self.problem = problem
        self.segments = segments
        self.total_cost = float(sum(s.cost for s in segments))

    @property
    def knots(self) -> np.ndarray:
        return self.problem.knots

    def segment_index(self, t: float, side: str = "left") -> int:
        """Interval owning t.  At an interior knot, side='left' selects the
        incoming segment (left limits for u and psi), side='right' the
        outgoing one."""
        knots = self.knots
        if not knots[0] <= t <= knots[-1]:
            raise ValueError(f"t={t!r} outside [{knots[0]!r}, {knots[-1]!r}]")
        lookup = "left" if side == "left" else "right"
        idx = int(np.searchsorted(knots, t, side=lookup)) - 1
        return min(max(idx, 0), len(self.segments) - 1)

    def x(self, t: float) -> np.ndarray:
        return self.segments[self.segment_index(t)].x(t)

    def u(self, t: float, side: str = "left") -> np.ndarray:
        return self.segments[self.segment_index(t, side)].u(t)

    def psi(self, t: float, side: str = "left") -> np.ndarray:
        return self.segments[self.segment_index(t, side)].psi(t)


def check_hypotheses(
    p: ProblemP,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
    samples_per_segment: int = 100,
) -> transition.ControllabilityResult:
    """Verify (H1) nonsingular B at sampled times and (H2) controllability
    on the full interval; raises HypothesisViolation on failure."""
    for i in range(p.segments):
        for t in np.linspace(p.knots[i], p.knots[i + 1], samples_per_segment):
            try:
                linalg.lu_solve(p.B(float(t)), np.zeros(p.dim))
            except linalg.SingularMatrixError as exc:
                raise HypothesisViolation(
                    "H1", f"B(t) numerically singular at t={float(t):.6g}: {exc}"
                ) from exc
    result = transition.controllability_gramian_W(
        p.A, p.B, float(p.knots[0]), float(p.knots[-1]), rtol, atol
    )
    if not result.is_controllable:
        raise HypothesisViolation(
            "H2", f"controllability Gramian on [{p.knots[0]}, {p.knots[-1]}] "
            "is not positive definite"
        )
    return result


def solve_problem_p(
    p: ProblemP,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
    *,
    hypothesis_checks: bool = True,
) -> GeneralizedSpline:
    """Solve the waypoint problem segment by segment.

    Segment failures carry the segment index; hypothesis checks run first
    unless explicitly skipped.
    """
    if hypothesis_checks:
        check_hypotheses(p, rtol, atol)
    solutions = []
    for i in range(p.segments):
        try:
            solutions.append(solve_segment(p.segment_problem(i), rtol, atol))
        except _SEGMENT_ERRORS as exc:
            raise type(exc)(f"segment {i} [{p.knots[i]}, {p.knots[i + 1]}]: {exc}") from exc
    return GeneralizedSpline(p, tuple(solutions))


@dataclass(frozen=True)
class ToleranceProfile:
    name: str
    interpolation: float
    maximality: float
    costate: float
    euler_lagrange: float
    cost: float

    def scaled(self, factor: float, name: str) -> "ToleranceProfile":
        return ToleranceProfile(
            name,
            self.interpolation * factor,
            self.maximality * factor,
            self.costate * factor,
            self.euler_lagrange * factor,
            self.cost * factor,
        )


_STRICT = ToleranceProfile("strict", interpolation=1e-7, maximality=1e-8,
                           costate=1e-7, euler_lagrange=1e-5, cost=1e-7)
PROFILES = {
    "strict": _STRICT,
    "default": _STRICT.scaled(10.0, "default"),
    "loose": _STRICT.scaled(100.0, "loose"),
}


@dataclass(frozen=True)
class SegmentResiduals:
    segment: int
    interpolation: float
    maximality: float
    costate: float
    euler_lagrange: float
    cost_mismatch: float

    def fields(self) -> tuple[float, float, float, float, float]:
        return (self.interpolation, self.maximality, self.costate,
                self.euler_lagrange, self.cost_mismatch)


@dataclass(frozen=True)
class VerificationReport:
    profile: ToleranceProfile
    per_segment: tuple[SegmentResiduals, ...]

    @property
    def maxima(self) -> SegmentResiduals:
        cols = np.array([r.fields() for r in self.per_segment])
        m = cols.max(axis=0)
        return SegmentResiduals(-1, *m)

    @property
    def passed(self) -> bool:
        m = self.maxima
        pr = self.profile
        return (m.interpolation <= pr.interpolation
                and m.maximality <= pr.maximality
                and m.costate <= pr.costate
                and m.euler_lagrange <= pr.euler_lagrange
                and m.cost_mismatch <= pr.cost)

    def render_table(self) -> str:
        pr = self.profile
        headers = ("segment", "interp", "maximality", "costate", "euler_lagr", "cost")
        limits = (pr.interpolation, pr.maximality, pr.costate,
                  pr.euler_lagrange, pr.cost)
        lines = ["  ".join(f"{h:>11}" for h in headers)]
        for r in self.per_segment:
            cells = [f"{r.segment:>11d}"]
            for value, limit in zip(r.fields(), limits):
                mark = "" if value <= limit else "*"
                cells.append(f"{value:>10.3e}{mark or ' '}")
            lines.append("  ".join(cells))
        lines.append("  ".join([f"{'threshold':>11}"] + [f"{v:>10.3e} " for v in limits]))
        lines.append(f"profile={pr.name} result={'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _central_first(fun, t: float, h: float) -> np.ndarray:
    return (fun(t + h) - fun(t - h)) / (2.0 * h)


def _central_second(fun, t: float, h: float) -> np.ndarray:
    return (fun(t + h) - 2.0 * fun(t) + fun(t - h)) / (h * h)


def verify(
    s: GeneralizedSpline,
    p: ProblemP,
    profile: ToleranceProfile | str = "default",
    samples_per_segment: int = 50,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
) -> VerificationReport:
    """Compute residual maxima per segment; reports, never raises, on
    violations."""
    if isinstance(profile, str):
        profile = PROFILES[profile]
    if samples_per_segment < 50:
        samples_per_segment = 50

    # Exact symbolic coefficients of the second-order state equation.
    L = first_order_operator(p.A)
    LstarL = compose(adjoint(L), L)

    reports = []
    for i, seg in enumerate(s.segments):
        t0, t1 = seg.t_start, seg.t_end
        dt = t1 - t0
        h1 = 1e-5 * dt    # first-derivative stencil
        h2 = 1e-4 * dt    # second-derivative stencil
        pad = 2.0 * h2
        ts = np.linspace(t0 + pad, t1 - pad, samples_per_segment)

        interp = max(
            float(np.max(np.abs(seg.x(t0) - p.waypoints[i]))),
            float(np.max(np.abs(seg.x(t1) - p.waypoints[i + 1]))),
        )

        maximality = 0.0
        costate = 0.0
        euler_lagrange = 0.0
        for t in ts:
            t = float(t)
            psi = seg.psi(t)
            Bu = seg.problem.B(t) @ seg.u(t)
            maximality = max(maximality, float(np.max(np.abs(psi - Bu))))

            psi_dot = _central_first(seg.psi, t, h1)
            costate = max(costate, float(np.max(np.abs(psi_dot + p.A(t).T @ psi))))

            def derivs(tt: float, k: int) -> np.ndarray:
                if k == 0:
                    return seg.x(tt)
                if k == 1:
                    return _central_first(seg.x, tt, h1)
                return _central_second(seg.x, tt, h2)

            residual = apply_operator(LstarL, derivs, t)
            euler_lagrange = max(euler_lagrange, float(np.max(np.abs(residual))))

        quad_cost = segment_cost_quadrature(seg, rtol, atol)
        cost_mismatch = abs(seg.cost - quad_cost)

        reports.append(SegmentResiduals(i, interp, maximality, costate,
                                        euler_lagrange, cost_mismatch))
    return VerificationReport(profile, tuple(reports))
