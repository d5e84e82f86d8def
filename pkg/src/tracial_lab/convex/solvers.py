"""Projected gradient methods on products of operator-norm balls."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..algebra import BallSpec, Tuple, l2_inner, l2_norm, project_ball, to_real_vector, from_real_vector

FD_REL_STEP = 1e-5


@dataclass(frozen=True)
class SolveResult:
    x: Tuple
    value: float
    converged: bool
    iterations: int
    gradient_mapping: float


def finite_difference_gradient(fun: Callable[[Tuple], float], x: Tuple, h: float | None = None) -> Tuple:
    """Central differences on an orthonormal real basis, step h = 1e-5 (1 + |x|)."""
    if h is None:
        h = FD_REL_STEP * (1.0 + l2_norm(x))
    v = to_real_vector(x)
    g = np.zeros_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        fp = fun(from_real_vector(x.algebra, x.arity, v + e))
        fm = fun(from_real_vector(x.algebra, x.arity, v - e))
        g[i] = (fp - fm) / (2 * h)
    return from_real_vector(x.algebra, x.arity, g)


def minimize_projected(fg, x0: Tuple, ball: BallSpec | None, tol: float = 1e-9, max_iter: int = 2000,
                       step: float = 1.0, project: Callable[[Tuple], Tuple] | None = None,
                       step_max: float | None = None) -> SolveResult:
    """Minimize f over a ball product by projected gradient with backtracking.

    fg(x) returns (f, grad) with grad a Tuple, or grad None to request finite
    differences. Convergence is declared when the gradient mapping
    |x - P(x - s g)| / s drops below tol. After each accepted step the trial
    step grows by 1.5, capped at step_max.
    """
    if project is None:
        project = (lambda z: z) if ball is None else (lambda z: project_ball(z, ball))

    def full(z):
        f, g = fg(z)
        if g is None:
            g = finite_difference_gradient(lambda w: fg(w)[0], z)
        return f, g

    if step_max is None:
        step_max = 1e3 * step
    x = project(x0)
    f, g = full(x)
    noise = 1e-15 * (1.0 + abs(f))
    gm = np.inf
    for it in range(max_iter):
        while True:
            xn = project(x - g * step)
            d = xn - x
            dn = l2_norm(d)
            if dn == 0.0:
                return SolveResult(x, f, True, it, 0.0)
            fn, gn = full(xn)
            if fn <= f + l2_inner(g, d).real + dn * dn / (2 * step):
                break
            # near the optimum f is resolved only to rounding noise; fall back to
            # a curvature test on gradients, which stays informative there
            if abs(fn - f) <= noise and l2_inner(gn - g, d).real <= dn * dn / step:
                break
            step *= 0.5
            if step < 1e-16:
                return SolveResult(x, f, False, it, gm)
        gm = dn / step
        x, f, g = xn, fn, gn
        noise = 1e-15 * (1.0 + abs(f))
        if gm <= tol:
            return SolveResult(x, f, True, it + 1, gm)
        step = min(step * 1.5, step_max)
    return SolveResult(x, f, False, max_iter, gm)


def maximize_projected(fg, x0: Tuple, ball: BallSpec | None, tol: float = 1e-9, max_iter: int = 2000,
                       step: float = 1.0, project=None, step_max: float | None = None) -> SolveResult:
    def neg(z):
        f, g = fg(z)
        return -f, (None if g is None else -g)

    res = minimize_projected(neg, x0, ball, tol, max_iter, step, project, step_max)
    return SolveResult(res.x, -res.value, res.converged, res.iterations, res.gradient_mapping)
