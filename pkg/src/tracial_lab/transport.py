"""Optimal couplings between unitary orbits of matrix tuples.

In M_n every automorphism is inner, so the orbit of a tuple under unitary
conjugation plays the role of its type. The cost C(X, Y) is the supremum of
Re<X, u Y u^*> over unitaries u; we maximize it by Riemannian gradient ascent
on U(n) with a Cayley retraction and Armijo backtracking.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .algebra import AlgebraError, BallSpec, Element, TracialAlgebra, Tuple, haar_unitary_matrix, l2_norm

GRAD_TOL = 1e-9
MAX_ITER = 5000
DEFAULT_RESTARTS = 20
ORACLE_MAX_N = 8


@dataclass(frozen=True)
class OrbitType:
    """A tuple up to unitary conjugation in a single matrix factor."""

    representative: Tuple
    ball: BallSpec | None = None

    def __post_init__(self):
        if not self.representative.algebra.is_factor:
            raise AlgebraError("orbit types are only supported on single-factor algebras")
        if self.ball is not None:
            if self.ball.arity != self.representative.arity:
                raise AlgebraError("ball arity differs from tuple arity")
            if not self.ball.contains(self.representative):
                raise AlgebraError("representative lies outside its ball")

    @property
    def n(self) -> int:
        return self.representative.algebra.dims[0]

    @property
    def matrices(self) -> np.ndarray:
        return self.representative.blocks[0]

    def norm_sq(self) -> float:
        return l2_norm(self.representative) ** 2


@dataclass(frozen=True)
class Coupling:
    x: Tuple
    y: Tuple
    aligner: Element
    value: float
    converged: bool

    @property
    def y_aligned(self) -> Tuple:
        return self.y.conjugate_by(self.aligner)


@dataclass(frozen=True)
class AscentResult:
    value: float
    u: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float


@dataclass(frozen=True)
class TransportResult:
    value: float
    aligner: Element
    converged: bool
    best_restart: int
    restart_values: tuple[float, ...] = field(repr=False)


def _as_matrices(x) -> np.ndarray:
    if isinstance(x, OrbitType):
        return x.matrices
    if isinstance(x, Tuple):
        if not x.algebra.is_factor:
            raise AlgebraError("transport runs on single-factor algebras only")
        return x.blocks[0]
    arr = np.asarray(x, dtype=complex)
    return arr[None] if arr.ndim == 2 else arr


def _objective(X, Y, u):
    n = u.shape[0]
    uyu = u @ Y @ u.conj().T
    return float(np.vdot(X, uyu).real / n)


def _euclidean_gradient(X, Y, u):
    n = u.shape[0]
    Xh = np.conj(np.swapaxes(X, 1, 2))
    Yh = np.conj(np.swapaxes(Y, 1, 2))
    return np.sum(X @ u @ Yh + Xh @ u @ Y, axis=0) / n


def cayley(a: np.ndarray, s: float) -> np.ndarray:
    """(I - s a/2)^{-1} (I + s a/2), unitary for skew-Hermitian a."""
    eye = np.eye(a.shape[0])
    return np.linalg.solve(eye - 0.5 * s * a, eye + 0.5 * s * a)


def orbit_ascent(X, Y, u0: np.ndarray, tol: float = GRAD_TOL, max_iter: int = MAX_ITER) -> AscentResult:
    """Maximize Re<X, u Y u^*> from u0.

    Steps follow the Barzilai-Borwein rule in the Lie algebra, safeguarded by
    Armijo backtracking; the sufficient-increase test tolerates rounding noise
    in f so that the gradient tolerance stays reachable near a maximizer.
    """
    u = u0
    f = _objective(X, Y, u)
    noise = 1e-14 * (1.0 + float(np.vdot(X, X).real + np.vdot(Y, Y).real) / u.shape[0])
    step = 1.0
    prev = None
    gn = np.inf
    for it in range(max_iter):
        g = _euclidean_gradient(X, Y, u)
        w = g @ u.conj().T
        a = 0.5 * (w - w.conj().T)
        gn = float(np.linalg.norm(a))
        if gn <= tol:
            return AscentResult(f, u, True, it, gn)
        if prev is not None:
            s_vec, a_prev = prev
            y_vec = a - a_prev
            sy = abs(float(np.vdot(s_vec, y_vec).real))
            if sy > 0:
                step = min(max(float(np.vdot(s_vec, s_vec).real) / sy, 1e-8), 1e8)
        while True:
            un = cayley(a, step) @ u
            fn = _objective(X, Y, un)
            if fn >= f + 1e-4 * step * gn * gn - noise:
                break
            step *= 0.5
            if step < 1e-14:
                return AscentResult(f, u, False, it, gn)
        prev = (step * a, a)
        u, f = un, fn
    return AscentResult(f, u, False, max_iter, gn)


def cost_orbit(X, Y, restarts: int = DEFAULT_RESTARTS, seed: int = 0, tol: float = GRAD_TOL,
               max_iter: int = MAX_ITER) -> TransportResult:
    """Best value of Re<X, u Y u^*> over restarts; a certified lower bound of C.

    Restart 0 starts at the identity; restart i > 0 starts at a Haar unitary
    seeded by (seed, i), so enlarging the budget never lowers the result.
    """
    Xm, Ym = _as_matrices(X), _as_matrices(Y)
    if Xm.shape != Ym.shape:
        raise AlgebraError(f"shape mismatch {Xm.shape} vs {Ym.shape}")
    n = Xm.shape[-1]
    best = None
    values = []
    for i in range(max(1, restarts)):
        if i == 0:
            u0 = np.eye(n, dtype=complex)
        else:
            u0 = haar_unitary_matrix(n, np.random.default_rng([seed, i]))
        res = orbit_ascent(Xm, Ym, u0, tol, max_iter)
        values.append(res.value)
        if best is None or res.value > best[0].value:
            best = (res, i)
    res, idx = best
    alg = TracialAlgebra.matrix(n)
    return TransportResult(res.value, Element(alg, [res.u]), res.converged, idx, tuple(values))


@dataclass(frozen=True)
class WassersteinResult:
    distance: float
    raw_d2: float
    coupling: Coupling

    @property
    def cost(self) -> float:
        return self.coupling.value


def _tuple_of(x) -> Tuple:
    if isinstance(x, OrbitType):
        return x.representative
    if isinstance(x, Tuple):
        return x
    return Tuple.from_matrices(np.asarray(x))


def wasserstein(X, Y, restarts: int = DEFAULT_RESTARTS, seed: int = 0, tol: float = GRAD_TOL,
                max_iter: int = MAX_ITER) -> WassersteinResult:
    """d^2 = |X|^2 + |Y|^2 - 2 C, with tiny negative values clamped to zero."""
    x, y = _tuple_of(X), _tuple_of(Y)
    res = cost_orbit(x, y, restarts, seed, tol, max_iter)
    raw = l2_norm(x) ** 2 + l2_norm(y) ** 2 - 2 * res.value
    d = math.sqrt(raw) if raw > 0 else 0.0
    return WassersteinResult(d, raw, Coupling(x, y, res.aligner, res.value, res.converged))


# ---------------------------------------------------------------- exact oracles

@dataclass(frozen=True)
class AssignmentResult:
    value: float | None
    brute_value: float | None
    permutation: tuple[int, ...] | None
    lsa_value: float | None


def sorted_eigen_cost(x: np.ndarray, y: np.ndarray) -> float:
    """max_u Re tau(x u y u^*) for Hermitian x, y: sum of sorted eigenvalue products / n."""
    lx = np.linalg.eigvalsh((x + x.conj().T) / 2)
    ly = np.linalg.eigvalsh((y + y.conj().T) / 2)
    return float(np.dot(lx, ly) / x.shape[0])


def _diagonals(m: np.ndarray) -> np.ndarray:
    if not np.allclose(m, np.einsum("kii->ki", m)[:, :, None] * np.eye(m.shape[-1]), atol=1e-12):
        raise AlgebraError("permutation oracle needs diagonal matrices")
    return np.einsum("kii->ki", m)


def permutation_profit(X, Y) -> np.ndarray:
    """P[i, j] = sum_k Re(conj(x_k,i) y_k,j) / n for diagonal tuples."""
    dx, dy = _diagonals(_as_matrices(X)), _diagonals(_as_matrices(Y))
    n = dx.shape[1]
    return np.einsum("ki,kj->ij", dx.conj(), dy).real / n


def brute_force_permutation(X, Y) -> tuple[float, tuple[int, ...]]:
    """Max over all n! permutations aligning diagonal tuples."""
    P = permutation_profit(X, Y)
    n = P.shape[0]
    if n > ORACLE_MAX_N:
        raise AlgebraError(f"brute force limited to n <= {ORACLE_MAX_N}")
    best, arg = -np.inf, None
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        v = P[rows, perm].sum()
        if v > best:
            best, arg = v, perm
    return float(best), tuple(int(p) for p in arg)


def assignment_oracle(X, Y) -> AssignmentResult:
    """Exact orbit cost for one Hermitian pair plus a permutation max for diagonal tuples.

    For commuting diagonal tuples the objective depends on u only through the
    doubly stochastic matrix |u_ij|^2 and is linear in it, so the maximum over
    unitaries equals the maximum over permutations.
    """
    Xm, Ym = _as_matrices(X), _as_matrices(Y)
    n = Xm.shape[-1]
    if n > ORACLE_MAX_N:
        raise AlgebraError(f"oracle limited to n <= {ORACLE_MAX_N}")
    value = None
    if Xm.shape[0] == 1:
        x, y = Xm[0], Ym[0]
        if np.allclose(x, x.conj().T, atol=1e-12) and np.allclose(y, y.conj().T, atol=1e-12):
            value = sorted_eigen_cost(x, y)
    brute, perm, lsa = None, None, None
    try:
        brute, perm = brute_force_permutation(Xm, Ym)
        P = permutation_profit(Xm, Ym)
        r, c = linear_sum_assignment(P, maximize=True)
        lsa = float(P[r, c].sum())
    except AlgebraError:
        if value is None:
            raise
    return AssignmentResult(value, brute, perm, lsa)


def permutation_unitary(perm: tuple[int, ...]) -> np.ndarray:
    """Unitary u with (u y u^*)_{ii} = y_{perm[i], perm[i]} for diagonal y."""
    n = len(perm)
    u = np.zeros((n, n), dtype=complex)
    u[np.arange(n), list(perm)] = 1.0
    return u
