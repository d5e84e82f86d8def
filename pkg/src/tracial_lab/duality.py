"""Dual potentials for orbit transport and the headline numeric experiments.

For an orbit type X in M_n with convex hull K of its unitary orbit:

* psi0(y) = sup_{a in K} Re<a, y>, the support function of K (the orbit
  supremum of affine maps),
* phi0(x) = sup_{y in D_r} Re<x, y> - psi0(y) = min_{a in K} N_r(x - a), where
  N_r(z) = sum_k r_k tau(|z_k|) is the norm dual to the ball product,
* psi1(y) = sup_{x' in D_r} Re<x', y> - phi0(x'),
* phi2 = phi0 + delta^2/2 + 2|r| delta and psi2 = psi1 + delta^2/2, with
  delta the distance to D_r, extend the pair to all of tuple space.

For a single Hermitian X, K is described exactly by majorization of
eigenvalues. For general tuples K is replaced by the convex hull of a working
set of orbit points, which keeps the pair exactly admissible.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import cvxpy as cp
import numpy as np

from .algebra import (
    AlgebraError,
    BallSpec,
    Element,
    Subalgebra,
    TracialAlgebra,
    Tuple,
    conditional_expectation,
    dist_to_ball,
    generated_algebra,
    haar_unitary_matrix,
    l2_inner,
    l2_norm,
    op_norm,
    random_tuple,
)
from .convex.envelopes import envelope_gradient, lasry_lions
from .convex.predicates import Predicate, TracePolynomial, max_affine
from .transport import OrbitType, cost_orbit

SOLVER = "CLARABEL"


def _factor_matrices(x) -> np.ndarray:
    if isinstance(x, OrbitType):
        x = x.representative
    if isinstance(x, Tuple):
        if not x.algebra.is_factor:
            raise AlgebraError("dual pairs are built on a single matrix factor")
        return x.blocks[0]
    arr = np.asarray(x, dtype=complex)
    return arr[None] if arr.ndim == 2 else arr


def _is_hermitian_singleton(X: np.ndarray) -> bool:
    return X.shape[0] == 1 and np.allclose(X[0], X[0].conj().T, atol=1e-12)


class OrbitSupport(Predicate):
    """psi0(y) = sup_u Re<u X u^*, y>, a convex function of y."""

    convex = True

    def __init__(self, X: Tuple, restarts: int = 20, seed: int = 0):
        self.X = X
        self.algebra, self.arity = X.algebra, X.arity
        self.mats = _factor_matrices(X)
        self.n = self.mats.shape[-1]
        self.exact = _is_hermitian_singleton(self.mats)
        self.restarts, self.seed = restarts, seed
        if self.exact:
            self._lam = np.sort(np.linalg.eigvalsh(self.mats[0]))[::-1]

    def maximizer(self, y: Tuple) -> Tuple:
        """An orbit point u X u^* attaining the supremum."""
        ym = _factor_matrices(y)
        if self.exact:
            h = (ym[0] + ym[0].conj().T) / 2
            lam, vec = np.linalg.eigh(h)
            vec = vec[:, ::-1]
            a = (vec * self._lam) @ vec.conj().T
            return Tuple(self.algebra, [a[None]])
        res = cost_orbit(ym, self.mats, self.restarts, self.seed)
        u = res.aligner.blocks[0]
        return Tuple(self.algebra, [u[None] @ self.mats @ u.conj().T[None]])

    def value(self, y: Tuple) -> float:
        ym = _factor_matrices(y)
        if self.exact:
            h = (ym[0] + ym[0].conj().T) / 2
            return float(np.dot(self._lam, np.sort(np.linalg.eigvalsh(h))[::-1]) / self.n)
        return cost_orbit(ym, self.mats, self.restarts, self.seed).value

    def gradient(self, y: Tuple) -> Tuple:
        return self.maximizer(y)

    def lipschitz(self, ball=None) -> float:
        return l2_norm(self.X)

    def semiconvexity(self, ball=None) -> float:
        return 0.0


@dataclass
class SolveInfo:
    value: float
    status: str
    ok: bool


class DualPair:
    """The potentials (phi0, psi0, psi1) and their global extensions for one orbit type."""

    def __init__(self, X, ball: BallSpec, working_set: Sequence[Tuple] | None = None,
                 restarts: int = 20, seed: int = 0, working_size: int = 12):
        X = X.representative if isinstance(X, OrbitType) else X
        self.X, self.ball = X, ball
        self.algebra, self.arity = X.algebra, X.arity
        if not self.algebra.is_factor:
            raise AlgebraError("dual pairs are built on a single matrix factor")
        if ball.arity != X.arity:
            raise AlgebraError("ball arity differs from tuple arity")
        if not ball.contains(X):
            raise AlgebraError("orbit representative must lie in D_r")
        self.n = self.algebra.dims[0]
        self.mats = X.blocks[0]
        self.psi0 = OrbitSupport(X, restarts, seed)
        self.exact = self.psi0.exact and working_set is None
        if self.exact:
            self.working = None
        else:
            pts = [self.mats]
            rng = np.random.default_rng(seed)
            for _ in range(working_size - 1):
                u = haar_unitary_matrix(self.n, rng)
                pts.append(u[None] @ self.mats @ u.conj().T[None])
            for w in working_set or ():
                pts.append(_factor_matrices(w))
            self.working = pts
        self._phi_prob = None
        self._psi_prob = None

    # ------------------------------------------------------------ cone programs

    def _hull_point(self):
        """cvxpy expressions for a point of K (one per entry) and constraints."""
        n, k = self.n, self.arity
        if self.exact:
            a = cp.Variable((n, n), hermitian=True)
            lam = np.sort(np.linalg.eigvalsh(self.mats[0]))[::-1]
            cons = [cp.real(cp.trace(a)) == lam.sum()]
            for j in range(1, n):
                cons.append(cp.lambda_sum_largest(a, j) <= lam[:j].sum())
            return [a], cons
        m = len(self.working)
        mu = cp.Variable(m, nonneg=True)
        cons = [cp.sum(mu) == 1]
        entries = []
        for e in range(k):
            entries.append(sum(mu[i] * self.working[i][e] for i in range(m)))
        return entries, cons

    def _dual_norm(self, diffs):
        return sum(r * cp.normNuc(d) for r, d in zip(self.ball.radii, diffs)) / self.n

    def _build_phi(self):
        k, n = self.arity, self.n
        xr = [cp.Parameter((n, n)) for _ in range(k)]
        xi = [cp.Parameter((n, n)) for _ in range(k)]
        a, cons = self._hull_point()
        diffs = [xr[e] + 1j * xi[e] - a[e] for e in range(k)]
        prob = cp.Problem(cp.Minimize(self._dual_norm(diffs)), cons)
        self._phi_prob = (prob, xr, xi)

    def _build_psi(self):
        k, n = self.arity, self.n
        yr = [cp.Parameter((n, n)) for _ in range(k)]
        yi = [cp.Parameter((n, n)) for _ in range(k)]
        xp = [cp.Variable((n, n), complex=True) for _ in range(k)]
        a, cons = self._hull_point()
        cons = list(cons) + [cp.sigma_max(xp[e]) <= self.ball.radii[e] for e in range(k)]
        lin = sum(cp.sum(cp.multiply(cp.real(xp[e]), yr[e]) + cp.multiply(cp.imag(xp[e]), yi[e]))
                  for e in range(k)) / n
        obj = lin - self._dual_norm([xp[e] - a[e] for e in range(k)])
        prob = cp.Problem(cp.Maximize(obj), cons)
        self._psi_prob = (prob, yr, yi)

    @staticmethod
    def _solve(prob) -> SolveInfo:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            try:
                prob.solve(solver=SOLVER)
            except cp.error.SolverError:
                pass
            if prob.status != cp.OPTIMAL:
                # interior point occasionally stalls short of its tolerances
                prob.solve(solver="SCS", eps=1e-10, max_iters=200000)
        ok = prob.status == cp.OPTIMAL
        return SolveInfo(float(prob.value), prob.status, ok)

    def phi0_info(self, x: Tuple) -> SolveInfo:
        if self._phi_prob is None:
            self._build_phi()
        prob, xr, xi = self._phi_prob
        xm = _factor_matrices(x)
        for e in range(self.arity):
            xr[e].value = xm[e].real
            xi[e].value = xm[e].imag
        return self._solve(prob)

    def phi0(self, x: Tuple) -> float:
        return self.phi0_info(x).value

    def psi_hull(self, y: Tuple) -> float:
        """Support function of K itself (the working-set hull when K is approximated)."""
        if self.exact:
            return self.psi0.value(y)
        ym = _factor_matrices(y)
        return max(float(np.vdot(p, ym).real) / self.n for p in self.working)

    def psi1_info(self, y: Tuple, method: str = "auto") -> SolveInfo:
        """Legendre transform of phi0 over D_r; equals the support function of K on D_r."""
        if method == "auto" and self.ball.contains(y, slack=0.0):
            return SolveInfo(self.psi_hull(y), "closed_form", True)
        if self._psi_prob is None:
            self._build_psi()
        prob, yr, yi = self._psi_prob
        ym = _factor_matrices(y)
        for e in range(self.arity):
            yr[e].value = ym[e].real
            yi[e].value = ym[e].imag
        return self._solve(prob)

    def psi1(self, y: Tuple, method: str = "auto") -> float:
        return self.psi1_info(y, method).value

    def phi2(self, x: Tuple) -> float:
        d = dist_to_ball(x, self.ball)
        return self.phi0(x) + 0.5 * d * d + 2 * self.ball.norm * d

    def psi2(self, y: Tuple, method: str = "auto") -> float:
        d = dist_to_ball(y, self.ball)
        return self.psi1(y, method) + 0.5 * d * d


def build_dual_pair(X, ball: BallSpec, **kw) -> DualPair:
    return DualPair(X, ball, **kw)


def extend_global(phi0: Callable[[Tuple], float], psi1: Callable[[Tuple], float], ball: BallSpec):
    """(phi2, psi2) = (phi0 + d^2/2 + 2|r| d, psi1 + d^2/2) with d the distance to D_r."""

    def phi2(x):
        d = dist_to_ball(x, ball)
        return phi0(x) + 0.5 * d * d + 2 * ball.norm * d

    def psi2(y):
        d = dist_to_ball(y, ball)
        return psi1(y) + 0.5 * d * d

    return phi2, psi2


@dataclass
class AdmissibilityReport:
    pairs: int
    min_margin: float
    tol: float
    outside_x: int
    outside_y: int
    solver_ok: bool

    @property
    def passed(self) -> bool:
        return self.min_margin >= -self.tol and self.solver_ok


def admissibility_check(pair: DualPair, xs: Sequence[Tuple], ys: Sequence[Tuple],
                        tol: float = 1e-6) -> AdmissibilityReport:
    """min over the grid xs x ys of phi2(x) + psi2(y) - Re<x, y>."""
    ok = True
    fx = []
    for x in xs:
        info = pair.phi0_info(x)
        ok = ok and info.ok
        d = dist_to_ball(x, pair.ball)
        fx.append(info.value + 0.5 * d * d + 2 * pair.ball.norm * d)
    gy = []
    for y in ys:
        info = pair.psi1_info(y)
        ok = ok and info.ok
        d = dist_to_ball(y, pair.ball)
        gy.append(info.value + 0.5 * d * d)
    xm = np.stack([_factor_matrices(x) for x in xs])
    ym = np.stack([_factor_matrices(y) for y in ys])
    inner = np.einsum("aknm,bknm->ab", xm.conj(), ym).real / pair.n
    margin = np.array(fx)[:, None] + np.array(gy)[None, :] - inner
    out_x = sum(not pair.ball.contains(x, slack=0.0) for x in xs)
    out_y = sum(not pair.ball.contains(y, slack=0.0) for y in ys)
    return AdmissibilityReport(len(xs) * len(ys), float(margin.min()), tol, out_x, out_y, ok)


@dataclass
class GapReport:
    gap: float
    phi_x: float
    psi_y: float
    cost: float
    converged: bool
    aligner: Element
    psi_y_closed_form: float | None = None


def duality_gap(X, Y, pair, restarts: int = 20, seed: int = 0) -> GapReport:
    """phi(X) + psi(Y_aligned) - C(X, Y) with Y aligned by the transport optimizer.

    pair is a DualPair, whose global extensions (phi2, psi2) are used with psi2
    evaluated by its cone program, or any (phi, psi) pair of callables.
    """
    x = X.representative if isinstance(X, OrbitType) else X
    y = Y.representative if isinstance(Y, OrbitType) else Y
    res = cost_orbit(x.blocks[0], y.blocks[0], restarts, seed)
    y_al = y.conjugate_by(res.aligner)
    closed = None
    if isinstance(pair, DualPair):
        phi_x = pair.phi2(x)
        psi_y = pair.psi2(y_al, method="cone")
        closed = pair.psi2(y_al)
    else:
        phi, psi = pair
        phi_x, psi_y = float(phi(x)), float(psi(y_al))
    return GapReport(phi_x + psi_y - res.value, phi_x, psi_y, res.value, res.converged,
                     res.aligner, closed)


# ---------------------------------------------------------------- experiments

@dataclass
class InterpolationReport:
    t: float
    dim_midpoint: int
    dim_pair: int

    @property
    def equal(self) -> bool:
        return self.dim_midpoint == self.dim_pair


def displacement_interpolation_check(X: Tuple, Y: Tuple, aligner: Element, t: float = 0.5) -> InterpolationReport:
    """Compare dim W*((1-t)x + t y_al) with dim W*(x, y_al)."""
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    y_al = Y.conjugate_by(aligner)
    mid = X * (1 - t) + y_al * t
    return InterpolationReport(t, len(generated_algebra(mid)), len(generated_algebra(X.concat(y_al))))


@dataclass
class RealizationReport:
    error: float
    gradient_norm: float
    target_norm: float
    converged: bool
    on_boundary: bool


def word_polynomial(a: Tuple, coeffs: Sequence[complex], words: Sequence[Sequence[tuple[int, bool]]]) -> Element:
    """z = sum_w c_w w(a), a *-polynomial in the entries of a."""
    alg = a.algebra
    z = alg.zero()
    for c, w in zip(coeffs, words):
        term = alg.identity()
        for i, starred in w:
            term = term @ (a[i].H if starred else a[i])
        z = z + term * c
    return z


def definable_realization_demo(a: Tuple, coeffs, words, t: float, r: float) -> RealizationReport:
    """Recover z = p(a) as the gradient at 0 of the double envelope of x -> Re<x, z>.

    The predicate is the trace polynomial sum_w Re tau(conj(c_w) w(a)^* x) in
    the single variable x with the entries of a as parameters.
    """
    z = word_polynomial(a, coeffs, words)
    if not t * op_norm(z) < r / 2:
        raise ValueError(f"need t |z| < r/2, got t |z| = {t * op_norm(z):.4g}, r/2 = {r / 2:.4g}")
    terms = []
    for c, w in zip(coeffs, words):
        # (w(a))^* reverses the word and toggles stars
        adj = tuple((1 + i, not s) for i, s in reversed(w))
        terms.append((np.conj(c), adj + ((0, False),)))
    phi = TracePolynomial(a.algebra, 1, terms, "re", constants=a.entries)
    psi = lasry_lions(phi, t, BallSpec((r,)), BallSpec((2 * r,)))
    rep = envelope_gradient(psi, Tuple.zeros(a.algebra, 1))
    zt = Tuple.from_elements([z])
    return RealizationReport(l2_norm(rep.gradient - zt), l2_norm(rep.gradient), l2_norm(zt),
                             rep.converged, rep.on_boundary)


@dataclass
class ExpectationReport:
    samples: int
    max_violation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def expectation_inequality_check(basis, pieces: Sequence[tuple[Tuple, float]], samples: int = 1000,
                                 seed=0, tol: float = 1e-9) -> ExpectationReport:
    """phi_A(E_A z) <= phi_A(z) for phi_A a max of affine maps with slopes in A^n."""
    sub = basis if isinstance(basis, Subalgebra) else Subalgebra.from_elements(basis)
    for a, _ in pieces:
        for e in a.entries:
            if not sub.contains(e, tol=1e-9):
                raise AlgebraError("affine coefficient does not lie in the subalgebra")
    phi = max_affine(pieces)
    alg, arity = sub.algebra, pieces[0][0].arity
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(samples):
        z = random_tuple(alg, arity, rng)
        ez = Tuple.from_elements([sub.project(e) for e in z.entries])
        worst = max(worst, phi(ez) - phi(z))
    return ExpectationReport(samples, worst, tol)
