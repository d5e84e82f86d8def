"""Numerical toolkit for finite-dimensional tracial algebras: closures, orbit transport,
regularized predicates and transport duality."""

__version__ = "0.1.0"

from .algebra import (
    AlgebraError,
    BallSpec,
    Element,
    Inclusion,
    Subalgebra,
    TracialAlgebra,
    Tuple,
)
from .closure import acl_finite, automorphism_fixed_oracle, dcl_finite
from .transport import OrbitType, assignment_oracle, cost_orbit, wasserstein
from .duality import build_dual_pair, duality_gap, extend_global

__all__ = [
    "AlgebraError", "BallSpec", "Element", "Inclusion", "Subalgebra", "TracialAlgebra", "Tuple",
    "acl_finite", "automorphism_fixed_oracle", "dcl_finite",
    "OrbitType", "assignment_oracle", "cost_orbit", "wasserstein",
    "build_dual_pair", "duality_gap", "extend_global",
]
