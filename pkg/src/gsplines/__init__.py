"""Generalized time-dependent splines in R^n via linear-quadratic optimal
control: closed-form transition-matrix solutions cross-validated against
collocation on the Euler-Lagrange equation L*Lx = 0."""

from .bvpspline import PiecewiseSpline, SplineSpec, solve_spline, spline_energy
from .diffop import (
    LinearDiffOperator,
    adjoint,
    apply_operator,
    companion_reduction,
    compose,
    first_order_operator,
    matrix_operator,
    scalar_operator,
)
from .expr import MatrixFunction, ParseError, TimeExpr, differentiate, evaluate, parse
from .lqsegment import (
    PerturbationReport,
    SegmentProblem,
    SegmentSolution,
    perturbation_check,
    segment_cost_quadrature,
    solve_segment,
)
from .spline import (
    PROFILES,
    GeneralizedSpline,
    HypothesisViolation,
    ProblemP,
    VerificationReport,
    solve_problem_p,
    verify,
)
from .transition import (
    TransitionOperator,
    build_transition,
    controllability_gramian_W,
    gramian_S,
)

__version__ = "0.1.0"

__all__ = [
    "PiecewiseSpline",
    "SplineSpec",
    "solve_spline",
    "spline_energy",
    "LinearDiffOperator",
    "adjoint",
    "apply_operator",
    "companion_reduction",
    "compose",
    "first_order_operator",
    "matrix_operator",
    "scalar_operator",
    "MatrixFunction",
    "ParseError",
    "TimeExpr",
    "differentiate",
    "evaluate",
    "parse",
    "PerturbationReport",
    "SegmentProblem",
    "SegmentSolution",
    "perturbation_check",
    "segment_cost_quadrature",
    "solve_segment",
    "PROFILES",
    "GeneralizedSpline",
    "HypothesisViolation",
    "ProblemP",
    "VerificationReport",
    "solve_problem_p",
    "verify",
    "TransitionOperator",
    "build_transition",
    "controllability_gramian_W",
    "gramian_S",
]
