"""Legendre transforms over balls, inf/sup convolutions and the double envelope.

The double envelope of phi with parameters (t, r, R) is

    psi(x) = sup_{w in D_r} inf_{z in D_R} [phi(z) + |w - z|^2/(4t) - |x - w|^2/(2t)].

For fixed z the bracket is a concave quadratic in w, maximized over D_r at
w = P_r(2x - z) with value

    F(z) = phi(z) + |x - z|^2/(2t) - dist(2x - z, D_r)^2/(4t).

When phi is c-semiconvex on D_R with 2tc < 1 the bracket is convex in z, the
minimax theorem applies, and psi(x) = min_{z in D_R} F(z), a strongly convex
problem with gradient grad phi(z) + (z - P_r(2x - z))/(2t). At the minimizer
z*, the outer maximizer is w* = P_r(2x - z*) and grad psi(x) = (w* - x)/t.
The nested sup-inf evaluation is kept as an independent route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..algebra import (
    BallSpec,
    Tuple,
    dist_to_ball,
    l2_inner,
    l2_norm,
    op_norms,
    project_ball,
    random_in_ball,
)
from .predicates import Predicate
from .solvers import finite_difference_gradient, maximize_projected, minimize_projected

INNER_TOL = 1e-10
DEFAULT_STARTS = 8
DEFAULT_BUDGET = 2000


@dataclass(frozen=True)
class EnvelopeSolution:
    value: float
    z: Tuple
    w: Tuple
    converged: bool
    certified: bool


class LasryLions(Predicate):
    """Double envelope psi; 1/t-semiconvex and 1/t-semiconcave."""

    def __init__(self, phi: Predicate, t: float, outer: BallSpec, inner: BallSpec,
                 method: str = "auto", tol: float = INNER_TOL, budget: int = DEFAULT_BUDGET,
                 starts: int = DEFAULT_STARTS, seed: int = 0):
        if t <= 0:
            raise ValueError("t must be positive")
        if outer.arity != phi.arity or inner.arity != phi.arity:
            raise ValueError("ball arity differs from predicate arity")
        if any(a > b for a, b in zip(outer.radii, inner.radii)):
            raise ValueError("outer radii must not exceed inner radii")
        if method not in ("auto", "reduced", "nested"):
            raise ValueError(f"unknown method {method!r}")
        self.phi, self.t, self.outer, self.inner = phi, float(t), outer, inner
        self.algebra, self.arity = phi.algebra, phi.arity
        self.method, self.tol, self.budget, self.starts, self.seed = method, tol, budget, starts, seed
        sx = phi.semiconvexity(inner)
        self.certified = 2 * self.t * sx < 1
        self._step = 1.0 / (1.0 / self.t + min(phi.semiconcavity(inner), 1e6))

    @property
    def smooth(self):
        return True

    def semiconvexity(self, ball=None):
        return 1.0 / self.t

    def semiconcavity(self, ball=None):
        return 1.0 / self.t

    def lipschitz(self, ball: BallSpec) -> float:
        return (self.outer.norm + ball.norm) / self.t

    def _reduced_fg(self, x: Tuple):
        t = self.t

        def fg(z):
            v = x * 2.0 - z
            w = project_ball(v, self.outer)
            pv, pg = self.phi.value_and_gradient(z)
            if pg is None:
                pg = finite_difference_gradient(self.phi.value, z)
            dxz = l2_norm(x - z)
            dv = l2_norm(v - w)
            f = pv + dxz * dxz / (2 * t) - dv * dv / (4 * t)
            g = pg + (z - w) / (2 * t)
            return f, g

        return fg

    def solve(self, x: Tuple) -> EnvelopeSolution:
        self._check_input(x)
        if self.method == "nested":
            return self.solve_nested(x)
        fg = self._reduced_fg(x)
        starts = [project_ball(x, self.inner)]
        if not self.certified:
            rng = np.random.default_rng(self.seed)
            starts += [random_in_ball(self.algebra, self.inner, rng) for _ in range(self.starts - 1)]
        best = None
        for z0 in starts:
            res = minimize_projected(fg, z0, self.inner, tol=self.tol, max_iter=self.budget,
                                     step=self._step)
            if best is None or res.value < best.value:
                best = res
        w = project_ball(x * 2.0 - best.x, self.outer)
        return EnvelopeSolution(best.value, best.x, w, best.converged, self.certified)

    def solve_nested(self, x: Tuple) -> EnvelopeSolution:
        """Outer projected ascent over w; inner strongly convex solve for theta(w)."""
        t = self.t
        state = {"z": project_ball(x, self.inner), "ok": True}

        def inner_fg(w):
            def fg(z):
                pv, pg = self.phi.value_and_gradient(z)
                if pg is None:
                    pg = finite_difference_gradient(self.phi.value, z)
                d = l2_norm(w - z)
                return pv + d * d / (4 * t), pg + (z - w) / (2 * t)
            return fg

        def outer_fg(w):
            res = minimize_projected(inner_fg(w), state["z"], self.inner, tol=1e-12,
                                     max_iter=self.budget, step=1.0 / (1.0 / (2 * t) + 1.0))
            state["z"] = res.x
            state["ok"] = state["ok"] and res.converged
            dxw = l2_norm(x - w)
            h = res.value - dxw * dxw / (2 * t)
            g = (w - res.x) / (2 * t) + (x - w) / t
            return h, g

        w0 = project_ball(x, self.outer)
        # the outer gradient inherits the inner solve error, so its tolerance is looser
        res = maximize_projected(outer_fg, w0, self.outer, tol=max(self.tol, 1e-8),
                                 max_iter=self.budget, step=t)
        outer_fg(res.x)
        return EnvelopeSolution(res.value, state["z"], res.x, res.converged and state["ok"],
                                self.certified)

    def value(self, x: Tuple) -> float:
        return self.solve(x).value

    def evaluate(self, x: Tuple):
        s = self.solve(x)
        return s.value, s.converged and s.certified

    def gradient(self, x: Tuple) -> Tuple:
        s = self.solve(x)
        return (s.w - x) / self.t

    def value_and_gradient(self, x: Tuple):
        s = self.solve(x)
        return s.value, (s.w - x) / self.t

    def sandwich_bounds(self) -> tuple[float, float]:
        """(lower, upper) bounds on psi - phi over D_r from the moduli of phi."""
        t, phi = self.t, self.phi
        om_R = lambda d: phi.modulus(self.inner, d)
        om_r = lambda d: phi.modulus(self.outer, d)
        lower = -om_R(math.sqrt(4 * t * om_R(2 * self.inner.norm)))
        upper = om_r(math.sqrt(2 * t * om_r(2 * self.outer.norm)))
        return lower, upper


def lasry_lions(phi: Predicate, t: float, r: BallSpec, R: BallSpec, **kw) -> LasryLions:
    return LasryLions(phi, t, r, R, **kw)


@dataclass(frozen=True)
class GradientReport:
    gradient: Tuple
    on_boundary: bool
    converged: bool


def envelope_gradient(psi: LasryLions, x: Tuple) -> GradientReport:
    """(w* - x)/t, flagging outer maximizers on the boundary of D_r."""
    s = psi.solve(x)
    v = x * 2.0 - s.z
    boundary = bool(np.any(op_norms(v) >= psi.outer.array * (1 - 1e-12)))
    return GradientReport((s.w - x) / psi.t, boundary, s.converged and s.certified)


def choose_t(phi: Predicate, r: BallSpec, R: BallSpec, eps: float) -> float:
    """Largest t (up to a safety factor) with sandwich error below eps and a certified solve."""
    L_r, L_R = phi.lipschitz(r), phi.lipschitz(R)
    cands = []
    if L_r > 0:
        cands.append(eps ** 2 / (4 * L_r ** 3 * r.norm))
    if L_R > 0:
        cands.append(eps ** 2 / (8 * L_R ** 3 * R.norm))
    sx = phi.semiconvexity(R)
    if sx > 0:
        cands.append(1.0 / (2 * sx))
    if not cands:
        return 1.0
    return 0.99 * min(cands)


class InfConvolution(Predicate):
    """x -> min_{z in D_R} phi(z) + |x - z|^2/(2t); 1/t-semiconcave."""

    def __init__(self, phi: Predicate, t: float, ball: BallSpec, tol: float = INNER_TOL,
                 budget: int = DEFAULT_BUDGET, starts: int = DEFAULT_STARTS, seed: int = 0):
        self.phi, self.t, self.ball = phi, float(t), ball
        self.algebra, self.arity = phi.algebra, phi.arity
        self.tol, self.budget, self.starts, self.seed = tol, budget, starts, seed
        self.certified = self.t * phi.semiconvexity(ball) < 1

    @property
    def smooth(self):
        return True

    def solve(self, x: Tuple):
        t = self.t

        def fg(z):
            pv, pg = self.phi.value_and_gradient(z)
            d = l2_norm(x - z)
            return pv + d * d / (2 * t), (None if pg is None else pg + (z - x) / t)

        starts = [project_ball(x, self.ball)]
        if not self.certified:
            rng = np.random.default_rng(self.seed)
            starts += [random_in_ball(self.algebra, self.ball, rng) for _ in range(self.starts - 1)]
        best = None
        for z0 in starts:
            res = minimize_projected(fg, z0, self.ball, tol=self.tol, max_iter=self.budget, step=t)
            if best is None or res.value < best.value:
                best = res
        return best

    def value(self, x):
        return self.solve(x).value

    def evaluate(self, x):
        s = self.solve(x)
        return s.value, s.converged and self.certified

    def gradient(self, x):
        return (x - self.solve(x).x) / self.t

    def semiconcavity(self, ball=None):
        return 1.0 / self.t

    def semiconvexity(self, ball=None):
        sx = self.phi.semiconvexity(self.ball)
        if sx == 0:
            return 0.0
        u = 1.0 / sx
        return 1.0 / (u - self.t) if self.t < u else math.inf

    def lipschitz(self, ball: BallSpec) -> float:
        return 2 * (self.ball + ball).norm / self.t

    def sandwich_bounds(self) -> tuple[float, float]:
        om = lambda d: self.phi.modulus(self.ball, d)
        return -om(math.sqrt(2 * self.t * om(2 * self.ball.norm))), 0.0


class SupConvolution(Predicate):
    """x -> max_{z in D_r} phi(z) - |x - z|^2/(2t); 1/t-semiconvex."""

    def __init__(self, phi: Predicate, t: float, ball: BallSpec, tol: float = INNER_TOL,
                 budget: int = DEFAULT_BUDGET, starts: int = DEFAULT_STARTS, seed: int = 0):
        self.phi, self.t, self.ball = phi, float(t), ball
        self.algebra, self.arity = phi.algebra, phi.arity
        self.tol, self.budget, self.starts, self.seed = tol, budget, starts, seed
        self.certified = self.t * phi.semiconcavity(ball) < 1

    @property
    def smooth(self):
        return True

    def solve(self, x: Tuple):
        t = self.t

        def fg(z):
            pv, pg = self.phi.value_and_gradient(z)
            d = l2_norm(x - z)
            return pv - d * d / (2 * t), (None if pg is None else pg - (z - x) / t)

        starts = [project_ball(x, self.ball)]
        if not self.certified:
            rng = np.random.default_rng(self.seed)
            starts += [random_in_ball(self.algebra, self.ball, rng) for _ in range(self.starts - 1)]
        best = None
        for z0 in starts:
            res = maximize_projected(fg, z0, self.ball, tol=self.tol, max_iter=self.budget, step=t)
            if best is None or res.value > best.value:
                best = res
        return best

    def value(self, x):
        return self.solve(x).value

    def evaluate(self, x):
        s = self.solve(x)
        return s.value, s.converged and self.certified

    def gradient(self, x):
        return (self.solve(x).x - x) / self.t

    def semiconvexity(self, ball=None):
        return 1.0 / self.t

    def semiconcavity(self, ball=None):
        sv = self.phi.semiconcavity(self.ball)
        if sv == 0:
            return 0.0
        u = 1.0 / sv
        return 1.0 / (u - self.t) if self.t < u else math.inf

    def lipschitz(self, ball: BallSpec) -> float:
        return 2 * (self.ball + ball).norm / self.t

    def sandwich_bounds(self) -> tuple[float, float]:
        om = lambda d: self.phi.modulus(self.ball, d)
        return 0.0, om(math.sqrt(2 * self.t * om(2 * self.ball.norm)))


def inf_conv(phi: Predicate, t: float, R: BallSpec, **kw) -> InfConvolution:
    return InfConvolution(phi, t, R, **kw)


def sup_conv(phi: Predicate, t: float, r: BallSpec, **kw) -> SupConvolution:
    return SupConvolution(phi, t, r, **kw)


class Legendre(Predicate):
    """x -> sup_{y in D_r} Re<x, y> - psi(y); convex and |r|-Lipschitz.

    Evaluated by projected ascent with multi-starts. The value is a certified
    lower bound; it is flagged unless the ascent converged on a smooth convex psi.
    """

    convex = True

    def __init__(self, psi: Predicate, ball: BallSpec, tol: float = 1e-9,
                 budget: int = DEFAULT_BUDGET, starts: int = DEFAULT_STARTS, seed: int = 0):
        self.psi, self.ball = psi, ball
        self.algebra, self.arity = psi.algebra, psi.arity
        self.tol, self.budget, self.starts, self.seed = tol, budget, starts, seed

    def solve(self, x: Tuple):
        def fg(y):
            pv, pg = self.psi.value_and_gradient(y)
            return l2_inner(x, y).real - pv, (None if pg is None else x - pg)

        rng = np.random.default_rng(self.seed)
        starts = [project_ball(x, self.ball)]
        starts += [random_in_ball(self.algebra, self.ball, rng) for _ in range(self.starts - 1)]
        best = None
        for y0 in starts:
            res = maximize_projected(fg, y0, self.ball, tol=self.tol, max_iter=self.budget)
            if best is None or res.value > best.value:
                best = res
        return best

    def value(self, x):
        return self.solve(x).value

    def evaluate(self, x):
        s = self.solve(x)
        return s.value, s.converged and self.psi.convex and self.psi.smooth

    def gradient(self, x):
        return self.solve(x).x

    def lipschitz(self, ball=None):
        return self.ball.norm

    def semiconvexity(self, ball=None):
        return 0.0


def legendre(psi: Predicate, r: BallSpec, **kw) -> Legendre:
    return Legendre(psi, r, **kw)
