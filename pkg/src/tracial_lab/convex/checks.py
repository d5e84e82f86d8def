"""Sampled checks of the quantitative inequalities for regularized predicates.

Every check returns a CheckReport with the worst observed violation; a check
passes when that violation does not exceed its tolerance.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..algebra import (
    AlgebraError,
    BallSpec,
    TracialAlgebra,
    Tuple,
    l2_inner,
    l2_norm,
    op_norms,
    random_in_ball,
    random_tuple,
    random_unitary,
    to_real_vector,
    trace,
)
from .predicates import Predicate
from .solvers import finite_difference_gradient

LAMBDAS = (0.25, 0.5, 0.75)


@dataclass
class CheckReport:
    name: str
    samples: int
    max_violation: float
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_violation <= self.tol)

    def to_json(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _grad(phi: Predicate, x: Tuple) -> Tuple:
    g = phi.gradient(x)
    return finite_difference_gradient(phi.value, x) if g is None else g


def semiconvexity_check(phi: Predicate, c: float, ball: BallSpec, samples: int = 50, seed=0,
                        tol: float = 1e-8, selfadjoint: bool = False) -> CheckReport:
    """phi((1-l)x0 + l x1) <= (1-l)phi(x0) + l phi(x1) + (c/2) l(1-l)|x1 - x0|^2."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(samples):
        x0 = random_in_ball(phi.algebra, ball, rng, selfadjoint)
        x1 = random_in_ball(phi.algebra, ball, rng, selfadjoint)
        f0, f1 = phi(x0), phi(x1)
        d2 = l2_norm(x1 - x0) ** 2
        for lam in LAMBDAS:
            fm = phi(x0 * (1 - lam) + x1 * lam)
            worst = max(worst, fm - ((1 - lam) * f0 + lam * f1 + 0.5 * c * lam * (1 - lam) * d2))
    return CheckReport("semiconvexity", samples, worst, tol, {"c": c})


def semiconcavity_check(phi: Predicate, c: float, ball: BallSpec, samples: int = 50, seed=0,
                        tol: float = 1e-8, selfadjoint: bool = False) -> CheckReport:
    """phi((1-l)x0 + l x1) >= (1-l)phi(x0) + l phi(x1) - (c/2) l(1-l)|x1 - x0|^2."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(samples):
        x0 = random_in_ball(phi.algebra, ball, rng, selfadjoint)
        x1 = random_in_ball(phi.algebra, ball, rng, selfadjoint)
        f0, f1 = phi(x0), phi(x1)
        d2 = l2_norm(x1 - x0) ** 2
        for lam in LAMBDAS:
            fm = phi(x0 * (1 - lam) + x1 * lam)
            worst = max(worst, (1 - lam) * f0 + lam * f1 - 0.5 * c * lam * (1 - lam) * d2 - fm)
    return CheckReport("semiconcavity", samples, worst, tol, {"c": c})


def second_difference_check(phi: Predicate, c: float, ball: BallSpec, samples: int = 50, seed=0,
                            step: float = 0.3, tol: float = 1e-8) -> CheckReport:
    """|phi(x+y+z) - phi(x+y) - phi(x+z) + phi(x)| <= c |y| |z|."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(samples):
        x = random_in_ball(phi.algebra, ball, rng)
        y = random_in_ball(phi.algebra, ball.scaled(step), rng)
        z = random_in_ball(phi.algebra, ball.scaled(step), rng)
        sd = phi(x + y + z) - phi(x + y) - phi(x + z) + phi(x)
        worst = max(worst, abs(sd) - c * l2_norm(y) * l2_norm(z))
    return CheckReport("second_difference", samples, worst, tol, {"c": c})


def strong_convexity_expansion_check(phi: Predicate, c: float, ball: BallSpec, samples: int = 50,
                                     seed=0, tol: float = 1e-6) -> CheckReport:
    """|x' - x| <= (1/c) |grad phi(x') - grad phi(x)| for c-strongly convex phi."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(samples):
        x0 = random_in_ball(phi.algebra, ball, rng)
        x1 = random_in_ball(phi.algebra, ball, rng)
        gap = l2_norm(_grad(phi, x1) - _grad(phi, x0))
        worst = max(worst, l2_norm(x1 - x0) - gap / c)
    return CheckReport("strong_convexity_expansion", samples, worst, tol, {"c": c})


def gradient_lipschitz_check(psi: Predicate, L: float, ball: BallSpec, samples: int = 50, seed=0,
                             tol: float = 1e-6) -> CheckReport:
    """|grad psi(x') - grad psi(x)| <= L |x' - x|."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    ratio = 0.0
    for _ in range(samples):
        x0 = random_in_ball(psi.algebra, ball, rng)
        x1 = random_in_ball(psi.algebra, ball, rng)
        gd = l2_norm(_grad(psi, x1) - _grad(psi, x0))
        dx = l2_norm(x1 - x0)
        worst = max(worst, gd - L * dx)
        if dx > 0:
            ratio = max(ratio, gd / dx)
    return CheckReport("gradient_lipschitz", samples, worst, tol, {"L": L, "max_ratio": ratio})


def quadratic_expansion_check(psi: Predicate, c: float, ball: BallSpec, samples: int = 50, seed=0,
                              tol: float = 1e-8) -> CheckReport:
    """|psi(x') - psi(x) - Re<x' - x, grad psi(x)>| <= (c/2)|x' - x|^2."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(samples):
        x0 = random_in_ball(psi.algebra, ball, rng)
        x1 = random_in_ball(psi.algebra, ball, rng)
        f0, g0 = psi.value_and_gradient(x0)
        if g0 is None:
            g0 = finite_difference_gradient(psi.value, x0)
        lin = psi(x1) - f0 - l2_inner(x1 - x0, g0).real
        worst = max(worst, abs(lin) - 0.5 * c * l2_norm(x1 - x0) ** 2)
    return CheckReport("quadratic_expansion", samples, worst, tol, {"c": c})


def gradient_fd_check(psi: Predicate, points, tol: float = 1e-4, floor: float = 1e-6) -> CheckReport:
    """Relative error of the analytic gradient against central finite differences."""
    worst = -math.inf
    count = 0
    for x in points:
        g = psi.gradient(x)
        gf = finite_difference_gradient(psi.value, x)
        err = l2_norm(g - gf) / max(l2_norm(gf), floor)
        worst = max(worst, err)
        count += 1
    return CheckReport("gradient_fd", count, worst, tol)


def sandwich_check(phi: Predicate, psi, ball: BallSpec, samples: int = 50, seed=0,
                   tol: float = 0.0) -> CheckReport:
    """lower <= psi - phi <= upper on the ball, with bounds from psi.sandwich_bounds()."""
    lower, upper = psi.sandwich_bounds()
    rng = np.random.default_rng(seed)
    worst = -math.inf
    lo_seen, hi_seen = math.inf, -math.inf
    for _ in range(samples):
        x = random_in_ball(phi.algebra, ball, rng)
        d = psi(x) - phi(x)
        lo_seen, hi_seen = min(lo_seen, d), max(hi_seen, d)
        worst = max(worst, lower - d, d - upper)
    return CheckReport("sandwich", samples, worst, tol,
                       {"lower": lower, "upper": upper, "min_diff": lo_seen, "max_diff": hi_seen})


def gradient_ball_check(psi, inner_ball: BallSpec, samples: int = 50, seed=0,
                        tol: float = 1e-6) -> CheckReport:
    """For x in D_r', each gradient entry has operator norm <= (r + r')/t."""
    rng = np.random.default_rng(seed)
    bound = (psi.outer.array + inner_ball.array) / psi.t
    worst = -math.inf
    for _ in range(samples):
        x = random_in_ball(psi.algebra, inner_ball, rng)
        worst = max(worst, float(np.max(op_norms(psi.gradient(x)) - bound)))
    return CheckReport("gradient_in_ball", samples, worst, tol, {"bound": bound.tolist()})


# ---------------------------------------------------------------- equivariant maps

def spectral_diameter(x) -> float:
    lam = np.linalg.eigvalsh((x + x.conj().T) / 2)
    return float(lam[-1] - lam[0])


def _hermitian_part(x: Tuple) -> Tuple:
    return (x + x.H) * 0.5


def equivariance_error(F: Callable[[Tuple], Tuple], x: Tuple, seed=0) -> float:
    u = random_unitary(x.algebra, seed)
    return l2_norm(F(x.conjugate_by(u)) - F(x).conjugate_by(u))


def spectral_diameter_check(F: Callable[[Tuple], Tuple], L: float, algebra: TracialAlgebra,
                            ball: BallSpec, samples: int = 50, seed=0, tol: float = 1e-6,
                            equivariance_tol: float = 1e-8) -> CheckReport:
    """spread(spectrum F(x)_i) <= L (sum_j spread(spectrum x_j)^2)^(1/2) on self-adjoint x in a factor.

    F is first tested for unitary equivariance on a few samples and rejected
    if it fails; L is the known Lipschitz constant of F, and the sampled
    Lipschitz ratio is reported alongside for reference.
    """
    if not algebra.is_factor:
        raise AlgebraError("spectral diameter check runs on a single matrix factor")
    rng = np.random.default_rng(seed)
    eq_err = 0.0
    for k in range(3):
        x = random_in_ball(algebra, ball, rng, selfadjoint=True)
        eq_err = max(eq_err, equivariance_error(F, x, rng))
    if eq_err > equivariance_tol:
        raise AlgebraError(f"map is not unitarily equivariant (error {eq_err:.3e})")
    worst = -math.inf
    ratio = 0.0
    prev = None
    for _ in range(samples):
        x = random_in_ball(algebra, ball, rng, selfadjoint=True)
        fx = F(x)
        rhs = L * math.sqrt(sum(spectral_diameter(m) ** 2 for m in x.blocks[0]))
        for m in fx.blocks[0]:
            worst = max(worst, spectral_diameter(m) - rhs)
        if prev is not None:
            dx = l2_norm(x - prev[0])
            if dx > 0:
                ratio = max(ratio, l2_norm(fx - prev[1]) / dx)
        prev = (x, fx)
    return CheckReport("spectral_diameter", samples, worst, tol,
                       {"L": L, "equivariance_error": eq_err, "sampled_lipschitz": ratio})


def range_bound_check(F: Callable[[Tuple], Tuple], L: float, algebra: TracialAlgebra, ball: BallSpec,
                      samples: int = 50, seed=0, tol: float = 1e-6) -> CheckReport:
    """|F_i(x)|_op <= t0 + 9 L |r| on self-adjoint x in D_r, with t0 = max_i |tau(F_i(0))|."""
    rng = np.random.default_rng(seed)
    f0 = F(Tuple.zeros(algebra, ball.arity))
    t0 = max(abs(trace(e)) for e in f0.entries)
    bound = t0 + 9 * L * ball.norm
    worst = -math.inf
    for _ in range(samples):
        x = random_in_ball(algebra, ball, rng, selfadjoint=True)
        worst = max(worst, float(np.max(op_norms(F(x)))) - bound)
    return CheckReport("range_bound", samples, worst, tol, {"t0": t0, "bound": bound})
