"""Convex analysis on the real inner-product space of matrix tuples."""
from .predicates import (
    Abs,
    Constant,
    FunctionPredicate,
    Max,
    Min,
    Predicate,
    Quantifier,
    Scale,
    Sum,
    TracePolynomial,
    half_norm_squared,
    linear_functional,
    max_affine,
    predicate_from_json,
)
from .solvers import SolveResult, finite_difference_gradient, maximize_projected, minimize_projected
from .envelopes import (
    GradientReport,
    InfConvolution,
    LasryLions,
    Legendre,
    SupConvolution,
    choose_t,
    envelope_gradient,
    inf_conv,
    lasry_lions,
    legendre,
    sup_conv,
)
from .checks import (
    CheckReport,
    gradient_ball_check,
    gradient_fd_check,
    gradient_lipschitz_check,
    quadratic_expansion_check,
    range_bound_check,
    sandwich_check,
    second_difference_check,
    semiconcavity_check,
    semiconvexity_check,
    spectral_diameter_check,
    strong_convexity_expansion_check,
)
