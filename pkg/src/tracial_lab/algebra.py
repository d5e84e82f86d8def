"""Finite-dimensional tracial *-algebras.

An algebra is a direct sum of complex matrix blocks M_{n_1} + ... + M_{n_J}
with exact rational weights beta_j summing to one. The trace is

    tau(x) = sum_j beta_j * tr(x_j) / n_j

so tau(1) = 1. Elements store one complex array per block; tuples store one
array of shape (arity, n_j, n_j) per block, which keeps per-block batched
linear algebra cheap.
"""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DIM_CAP = 64
BALL_SLACK = 1e-10
CLOSURE_TOL = 1e-9


class AlgebraError(ValueError):
    """Structural or invariant violation in algebra data."""


def _as_fraction(w) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, float):
        raise AlgebraError(f"weights must be exact rationals, got float {w!r}")
    try:
        return Fraction(w)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise AlgebraError(f"cannot parse weight {w!r}") from exc


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class TracialAlgebra:
    """Weighted direct sum of full matrix blocks."""

    dims: tuple[int, ...]
    weights: tuple[Fraction, ...]
    cap: int = field(default=DEFAULT_DIM_CAP, compare=False, repr=False)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        weights = tuple(_as_fraction(w) for w in self.weights)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", weights)
        if not dims:
            raise AlgebraError("algebra needs at least one block")
        if len(dims) != len(weights):
            raise AlgebraError("dims and weights differ in length")
        if any(n < 1 for n in dims):
            raise AlgebraError(f"block dimensions must be >= 1, got {dims}")
        if any(w <= 0 for w in weights):
            raise AlgebraError(f"block weights must be > 0, got {weights}")
        if sum(weights) != 1:
            raise AlgebraError(f"weights sum to {sum(weights)}, not 1")
        if self.complex_dim > self.cap:
            raise AlgebraError(
                f"total dimension {self.complex_dim} exceeds cap {self.cap}")

    @classmethod
    def matrix(cls, n: int) -> "TracialAlgebra":
        return cls((n,), (Fraction(1),))

    @classmethod
    def from_blocks(cls, blocks: Iterable[tuple[int, object]], cap=DEFAULT_DIM_CAP):
        blocks = list(blocks)
        return cls(tuple(b[0] for b in blocks), tuple(b[1] for b in blocks), cap=cap)

    @classmethod
    def from_json(cls, doc, cap=DEFAULT_DIM_CAP) -> "TracialAlgebra":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if not isinstance(doc, dict) or set(doc) != {"blocks"}:
            raise AlgebraError("algebra document must be an object with only 'blocks'")
        blocks = []
        for b in doc["blocks"]:
            if not isinstance(b, dict) or set(b) != {"dim", "weight"}:
                raise AlgebraError(f"bad block entry {b!r}; need exactly 'dim' and 'weight'")
            if not isinstance(b["dim"], int) or isinstance(b["dim"], bool):
                raise AlgebraError(f"block dim must be an integer, got {b['dim']!r}")
            if not isinstance(b["weight"], (str, int)) or isinstance(b["weight"], bool):
                raise AlgebraError(f"block weight must be a rational string, got {b['weight']!r}")
            blocks.append((b["dim"], _as_fraction(b["weight"])))
        return cls.from_blocks(blocks, cap=cap)

    def to_json(self) -> dict:
        return {"blocks": [{"dim": n, "weight": str(w)} for n, w in zip(self.dims, self.weights)]}

    @property
    def num_blocks(self) -> int:
        return len(self.dims)

    @property
    def complex_dim(self) -> int:
        return sum(n * n for n in self.dims)

    def real_dim(self, arity: int = 1) -> int:
        return 2 * arity * self.complex_dim

    @functools.cached_property
    def float_weights(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    @functools.cached_property
    def scales(self) -> np.ndarray:
        """Per-block factors sqrt(beta_j / n_j) making vectorization isometric."""
        return np.sqrt(self.float_weights / np.array(self.dims, dtype=float))

    @property
    def is_factor(self) -> bool:
        return self.num_blocks == 1

    def identity(self) -> "Element":
        return Element(self, [np.eye(n, dtype=complex) for n in self.dims], copy=False)

    def zero(self) -> "Element":
        return Element(self, [np.zeros((n, n), dtype=complex) for n in self.dims], copy=False)

    def scalar(self, c) -> "Element":
        return Element(self, [c * np.eye(n, dtype=complex) for n in self.dims], copy=False)

    def element(self, blocks) -> "Element":
        return Element(self, blocks)

    def matrix_units(self) -> list["Element"]:
        """Unnormalized matrix units e_ab of every block, in block order."""
        out = []
        for j, n in enumerate(self.dims):
            for a, b in itertools.product(range(n), repeat=2):
                blocks = [np.zeros((m, m), dtype=complex) for m in self.dims]
                blocks[j][a, b] = 1.0
                out.append(Element(self, blocks, copy=False))
        return out

    def orthonormal_basis(self) -> list["Element"]:
        """Matrix units rescaled to unit L2 norm."""
        return [from_complex_vector(self, v) for v in np.eye(self.complex_dim, dtype=complex)]

    def central_projection(self, block_ids: Iterable[int]) -> "Element":
        ids = set(block_ids)
        return Element(self, [np.eye(n, dtype=complex) * (j in ids) for j, n in enumerate(self.dims)],
                       copy=False)


class Element:
    """Block-diagonal element of a TracialAlgebra."""

    __slots__ = ("algebra", "blocks")

    def __init__(self, algebra: TracialAlgebra, blocks, copy: bool = True):
        blocks = list(blocks)
        if len(blocks) != algebra.num_blocks:
            raise AlgebraError(f"expected {algebra.num_blocks} blocks, got {len(blocks)}")
        out = []
        for b, n in zip(blocks, algebra.dims):
            arr = np.array(b, dtype=complex, copy=copy) if copy else np.asarray(b, dtype=complex)
            if arr.ndim == 0 and n == 1:
                arr = arr.reshape(1, 1)
            if arr.shape != (n, n):
                raise AlgebraError(f"block shape {arr.shape} does not match dim {n}")
            out.append(arr)
        self.algebra = algebra
        self.blocks = out

    def _check(self, other: "Element"):
        if not isinstance(other, Element):
            raise AlgebraError(f"expected Element, got {type(other).__name__}")
        if other.algebra is not self.algebra and other.algebra != self.algebra:
            raise AlgebraError("elements live in different algebras")

    @property
    def H(self) -> "Element":
        return Element(self.algebra, [b.conj().T for b in self.blocks], copy=False)

    adjoint = H

    def __add__(self, other):
        if np.isscalar(other):
            other = self.algebra.scalar(other)
        self._check(other)
        return Element(self.algebra, [a + b for a, b in zip(self.blocks, other.blocks)], copy=False)

    __radd__ = __add__

    def __sub__(self, other):
        if np.isscalar(other):
            other = self.algebra.scalar(other)
        self._check(other)
        return Element(self.algebra, [a - b for a, b in zip(self.blocks, other.blocks)], copy=False)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Element(self.algebra, [-a for a in self.blocks], copy=False)

    def __mul__(self, c):
        if isinstance(c, Element):
            return self @ c
        return Element(self.algebra, [c * a for a in self.blocks], copy=False)

    def __rmul__(self, c):
        return Element(self.algebra, [c * a for a in self.blocks], copy=False)

    def __truediv__(self, c):
        return Element(self.algebra, [a / c for a in self.blocks], copy=False)

    def __matmul__(self, other):
        self._check(other)
        return Element(self.algebra, [a @ b for a, b in zip(self.blocks, other.blocks)], copy=False)

    def allclose(self, other: "Element", atol: float = 1e-10) -> bool:
        self._check(other)
        return all(np.allclose(a, b, atol=atol, rtol=0) for a, b in zip(self.blocks, other.blocks))

    def is_selfadjoint(self, atol: float = 1e-12) -> bool:
        return all(np.allclose(b, b.conj().T, atol=atol, rtol=0) for b in self.blocks)

    def __repr__(self):
        return f"Element(dims={self.algebra.dims})"


class Tuple:
    """Ordered n-tuple of elements of one algebra, stored block-major."""

    __slots__ = ("algebra", "blocks")

    def __init__(self, algebra: TracialAlgebra, blocks, copy: bool = True):
        blocks = list(blocks)
        if len(blocks) != algebra.num_blocks:
            raise AlgebraError(f"expected {algebra.num_blocks} blocks, got {len(blocks)}")
        arity = None
        out = []
        for b, n in zip(blocks, algebra.dims):
            arr = np.array(b, dtype=complex, copy=copy) if copy else np.asarray(b, dtype=complex)
            if arr.ndim != 3 or arr.shape[1:] != (n, n):
                raise AlgebraError(f"tuple block shape {arr.shape} does not match dim {n}")
            if arity is None:
                arity = arr.shape[0]
            elif arr.shape[0] != arity:
                raise AlgebraError("inconsistent arity across blocks")
            out.append(arr)
        self.algebra = algebra
        self.blocks = out

    @classmethod
    def from_elements(cls, elements: Sequence[Element]) -> "Tuple":
        elements = list(elements)
        if not elements:
            raise AlgebraError("empty tuple")
        alg = elements[0].algebra
        for e in elements:
            if e.algebra != alg:
                raise AlgebraError("tuple entries live in different algebras")
        blocks = [np.stack([e.blocks[j] for e in elements]) for j in range(alg.num_blocks)]
        return cls(alg, blocks, copy=False)

    @classmethod
    def zeros(cls, algebra: TracialAlgebra, arity: int) -> "Tuple":
        return cls(algebra, [np.zeros((arity, n, n), dtype=complex) for n in algebra.dims], copy=False)

    @classmethod
    def from_matrices(cls, mats) -> "Tuple":
        """Single-block tuple from an array of shape (arity, n, n)."""
        mats = np.asarray(mats, dtype=complex)
        if mats.ndim == 2:
            mats = mats[None]
        return cls(TracialAlgebra.matrix(mats.shape[-1]), [mats])

    @property
    def arity(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def entries(self) -> list[Element]:
        return [self[k] for k in range(self.arity)]

    def __getitem__(self, k: int) -> Element:
        return Element(self.algebra, [b[k] for b in self.blocks], copy=False)

    def __len__(self):
        return self.arity

    def _check(self, other: "Tuple"):
        if not isinstance(other, Tuple):
            raise AlgebraError(f"expected Tuple, got {type(other).__name__}")
        if other.algebra is not self.algebra and other.algebra != self.algebra:
            raise AlgebraError("tuples live in different algebras")
        if other.arity != self.arity:
            raise AlgebraError(f"arity mismatch {self.arity} vs {other.arity}")

    @property
    def H(self) -> "Tuple":
        return Tuple(self.algebra, [np.conj(np.swapaxes(b, 1, 2)) for b in self.blocks], copy=False)

    def __add__(self, other):
        self._check(other)
        return Tuple(self.algebra, [a + b for a, b in zip(self.blocks, other.blocks)], copy=False)

    def __sub__(self, other):
        self._check(other)
        return Tuple(self.algebra, [a - b for a, b in zip(self.blocks, other.blocks)], copy=False)

    def __neg__(self):
        return Tuple(self.algebra, [-a for a in self.blocks], copy=False)

    def __mul__(self, c):
        return Tuple(self.algebra, [c * a for a in self.blocks], copy=False)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return Tuple(self.algebra, [a / c for a in self.blocks], copy=False)

    def concat(self, other: "Tuple") -> "Tuple":
        if other.algebra != self.algebra:
            raise AlgebraError("tuples live in different algebras")
        return Tuple(self.algebra, [np.concatenate([a, b]) for a, b in zip(self.blocks, other.blocks)],
                     copy=False)

    def select(self, indices) -> "Tuple":
        """Sub-tuple of the given entry positions."""
        idx = list(indices)
        return Tuple(self.algebra, [b[idx] for b in self.blocks], copy=False)

    def conjugate_by(self, u: Element) -> "Tuple":
        """Entrywise u x u*."""
        return Tuple(self.algebra,
                     [ub[None] @ b @ ub.conj().T[None] for ub, b in zip(u.blocks, self.blocks)],
                     copy=False)

    def allclose(self, other: "Tuple", atol: float = 1e-10) -> bool:
        self._check(other)
        return all(np.allclose(a, b, atol=atol, rtol=0) for a, b in zip(self.blocks, other.blocks))

    def __repr__(self):
        return f"Tuple(arity={self.arity}, dims={self.algebra.dims})"


@dataclass(frozen=True)
class BallSpec:
    """Product of operator-norm balls with radii r_1..r_n."""

    radii: tuple[float, ...]

    def __post_init__(self):
        radii = tuple(float(r) for r in np.atleast_1d(self.radii))
        if not radii or any(not (r > 0) for r in radii):
            raise AlgebraError(f"ball radii must be positive, got {radii}")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def uniform(cls, r: float, arity: int) -> "BallSpec":
        return cls((r,) * arity)

    @property
    def arity(self) -> int:
        return len(self.radii)

    @property
    def norm(self) -> float:
        """|r| = (sum r_k^2)^(1/2)."""
        return float(np.sqrt(np.sum(np.square(self.radii))))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.radii)

    def scaled(self, c: float) -> "BallSpec":
        return BallSpec(tuple(c * r for r in self.radii))

    def __add__(self, other: "BallSpec") -> "BallSpec":
        return BallSpec(tuple(a + b for a, b in zip(self.radii, other.radii)))

    def contains(self, x: Tuple, slack: float = BALL_SLACK) -> bool:
        return bool(np.all(op_norms(x) <= self.array + slack))

    def to_json(self) -> list:
        return list(self.radii)


# ---------------------------------------------------------------- traces

def trace(x: Element) -> complex:
    """Normalized weighted trace tau."""
    if not isinstance(x, Element):
        raise AlgebraError(f"trace expects an Element, got {type(x).__name__}")
    w = x.algebra.float_weights
    return complex(sum(wj * np.trace(b) / b.shape[0] for wj, b in zip(w, x.blocks)))


def trace_exact(x: Element) -> Fraction:
    """Trace in rational arithmetic for elements with rational real entries."""
    total = Fraction(0)
    for wj, b in zip(x.algebra.weights, x.blocks):
        diag = np.diag(b)
        if np.any(diag.imag != 0):
            raise AlgebraError("exact trace needs real diagonal entries")
        s = sum((Fraction(float(v)) for v in diag.real), Fraction(0))
        total += wj * s / b.shape[0]
    return total


def _as_tuple(x) -> Tuple:
    if isinstance(x, Tuple):
        return x
    if isinstance(x, Element):
        return Tuple.from_elements([x])
    raise AlgebraError(f"expected Element or Tuple, got {type(x).__name__}")


def l2_inner(x, y) -> complex:
    """<x, y> = sum_k tau(x_k^* y_k)."""
    x, y = _as_tuple(x), _as_tuple(y)
    x._check(y)
    w = x.algebra.float_weights
    total = 0j
    for wj, n, a, b in zip(w, x.algebra.dims, x.blocks, y.blocks):
        total += wj / n * np.vdot(a, b)
    return complex(total)


def l2_norm(x) -> float:
    x = _as_tuple(x)
    w = x.algebra.float_weights
    s = sum(wj / n * np.vdot(a, a).real for wj, n, a in zip(w, x.algebra.dims, x.blocks))
    return float(np.sqrt(max(s, 0.0)))


def l2_dist(x, y) -> float:
    x, y = _as_tuple(x), _as_tuple(y)
    return l2_norm(x - y)


def op_norm(x: Element) -> float:
    """Largest singular value over all blocks."""
    if isinstance(x, Tuple):
        raise AlgebraError("op_norm takes an Element; use op_norms for tuples")
    return float(max(np.linalg.norm(b, 2) for b in x.blocks))


def op_norms(x: Tuple) -> np.ndarray:
    """Per-entry operator norms of a tuple."""
    x = _as_tuple(x)
    per_block = [np.linalg.svd(b, compute_uv=False)[:, 0] for b in x.blocks]
    return np.max(np.stack(per_block), axis=0)


def spectrum(x: Element) -> np.ndarray:
    """Sorted eigenvalues of a self-adjoint element, over all blocks."""
    return np.sort(np.concatenate([np.linalg.eigvalsh(b) for b in x.blocks]))


# ---------------------------------------------------------------- balls

def _clip_block(b: np.ndarray, radii: np.ndarray) -> np.ndarray:
    u, s, vh = np.linalg.svd(b)
    over = s > radii[:, None]
    if not over.any():
        return b
    s = np.minimum(s, radii[:, None])
    out = b.copy()
    rows = np.nonzero(over.any(axis=1))[0]
    out[rows] = (u[rows] * s[rows, None, :]) @ vh[rows]
    return out


def project_ball(x: Tuple, ball: BallSpec) -> Tuple:
    """Nearest point of the ball product: clip singular values per entry and block."""
    x = _as_tuple(x)
    if ball.arity != x.arity:
        raise AlgebraError(f"ball arity {ball.arity} vs tuple arity {x.arity}")
    radii = ball.array
    return Tuple(x.algebra, [_clip_block(b, radii) for b in x.blocks], copy=False)


def dist_to_ball(x: Tuple, ball: BallSpec) -> float:
    """L2 distance from x to the ball product."""
    x = _as_tuple(x)
    if ball.arity != x.arity:
        raise AlgebraError(f"ball arity {ball.arity} vs tuple arity {x.arity}")
    radii = ball.array
    total = 0.0
    for wj, n, b in zip(x.algebra.float_weights, x.algebra.dims, x.blocks):
        s = np.linalg.svd(b, compute_uv=False)
        total += wj / n * np.sum(np.maximum(s - radii[:, None], 0.0) ** 2)
    return float(np.sqrt(total))


# ---------------------------------------------------------------- vectorization

def complex_vector(x: Element) -> np.ndarray:
    """Isometric complex coordinates: the standard inner product equals tau(x^* y)."""
    sc = x.algebra.scales
    return np.concatenate([s * b.ravel() for s, b in zip(sc, x.blocks)])


def from_complex_vector(algebra: TracialAlgebra, v: np.ndarray) -> Element:
    blocks, pos = [], 0
    for s, n in zip(algebra.scales, algebra.dims):
        blocks.append(np.asarray(v[pos:pos + n * n]).reshape(n, n) / s)
        pos += n * n
    return Element(algebra, blocks, copy=True)


def to_real_vector(x: Tuple) -> np.ndarray:
    """Isometric real coordinates: the dot product equals Re<x, y>."""
    x = _as_tuple(x)
    parts = [s * b.ravel() for s, b in zip(x.algebra.scales, x.blocks)]
    c = np.concatenate(parts)
    return np.concatenate([c.real, c.imag])


def from_real_vector(algebra: TracialAlgebra, arity: int, v: np.ndarray) -> Tuple:
    v = np.asarray(v, dtype=float)
    half = v.size // 2
    c = v[:half] + 1j * v[half:]
    blocks, pos = [], 0
    for s, n in zip(algebra.scales, algebra.dims):
        size = arity * n * n
        blocks.append(c[pos:pos + size].reshape(arity, n, n) / s)
        pos += size
    return Tuple(algebra, blocks, copy=False)


def orthonormalize(vectors: np.ndarray, tol: float = CLOSURE_TOL) -> np.ndarray:
    """Orthonormal basis (columns) for the span of the given columns."""
    vectors = np.asarray(vectors)
    if vectors.size == 0 or vectors.shape[1] == 0:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    return u[:, s > tol]


# ---------------------------------------------------------------- subalgebras

class Subalgebra:
    """A *-subalgebra described by an orthonormal basis in complex coordinates."""

    def __init__(self, algebra: TracialAlgebra, q: np.ndarray):
        self.algebra = algebra
        self.q = q

    @classmethod
    def from_elements(cls, elements: Sequence[Element], validate: bool = True) -> "Subalgebra":
        elements = list(elements)
        if not elements:
            raise AlgebraError("empty basis")
        alg = elements[0].algebra
        mat = np.stack([complex_vector(e) for e in elements], axis=1)
        norms = np.linalg.norm(mat, axis=0)
        mat = mat[:, norms > 0] / norms[norms > 0]
        sub = cls(alg, orthonormalize(mat))
        if validate:
            sub.validate()
        return sub

    @property
    def dim(self) -> int:
        return self.q.shape[1]

    def basis(self) -> list[Element]:
        return [from_complex_vector(self.algebra, c) for c in self.q.T]

    def project(self, z: Element) -> Element:
        v = complex_vector(z)
        return from_complex_vector(self.algebra, self.q @ (self.q.conj().T @ v))

    def residual(self, z: Element) -> float:
        v = complex_vector(z)
        return float(np.linalg.norm(v - self.q @ (self.q.conj().T @ v)))

    def contains(self, z: Element, tol: float = CLOSURE_TOL) -> bool:
        return self.residual(z) <= tol * max(1.0, l2_norm(z))

    def contains_span(self, other: "Subalgebra", tol: float = 1e-8) -> bool:
        r = other.q - self.q @ (self.q.conj().T @ other.q)
        return bool(r.size == 0 or np.max(np.linalg.norm(r, axis=0)) <= tol)

    def validate(self, tol: float = CLOSURE_TOL):
        """Check closure under adjoint and product."""
        basis = self.basis()
        for b in basis:
            if self.residual(b.H) > tol * max(1.0, l2_norm(b)):
                raise AlgebraError("basis span is not closed under adjoint")
        for a, b in itertools.product(basis, repeat=2):
            p = a @ b
            if self.residual(p) > tol * max(1.0, l2_norm(p)):
                raise AlgebraError("basis span is not closed under products")
        if not self.contains(self.algebra.identity()):
            raise AlgebraError("basis span does not contain the unit")


def conditional_expectation(basis, z: Element, validate: bool = True) -> Element:
    """Trace-preserving orthogonal projection of z onto span(basis)."""
    sub = basis if isinstance(basis, Subalgebra) else Subalgebra.from_elements(basis, validate=validate)
    return sub.project(z)


def generated_algebra(x, tol: float = 1e-8) -> list[Element]:
    """Orthonormal basis of the unital *-algebra generated by the entries of x."""
    x = _as_tuple(x)
    alg = x.algebra
    gens = []
    for e in x.entries:
        gens += [e, e.H]
    q = orthonormalize(complex_vector(alg.identity())[:, None] / 1.0, tol)
    gvecs = [complex_vector(g) for g in gens]
    q = _extend(q, np.stack(gvecs, axis=1), tol)
    while True:
        basis = [from_complex_vector(alg, c) for c in q.T]
        cands = [complex_vector(g @ b) for g in gens for b in basis]
        q_new = _extend(q, np.stack(cands, axis=1), tol)
        if q_new.shape[1] == q.shape[1]:
            return basis
        q = q_new


def _extend(q: np.ndarray, cands: np.ndarray, tol: float) -> np.ndarray:
    """Add to orthonormal columns q the directions of cands not already spanned."""
    for _ in range(2):
        cands = cands - q @ (q.conj().T @ cands)
    norms = np.linalg.norm(cands, axis=0)
    keep = norms > tol
    if not keep.any():
        return q
    extra = orthonormalize(cands[:, keep] / norms[keep], tol)
    extra = extra - q @ (q.conj().T @ extra)
    extra = orthonormalize(extra, tol)
    return np.concatenate([q, extra], axis=1)


# ---------------------------------------------------------------- inclusions

@dataclass(frozen=True)
class Inclusion:
    """Unital trace-preserving embedding data: sub -> amb with multiplicities."""

    sub: TracialAlgebra
    amb: TracialAlgebra
    mult: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        mult = tuple(tuple(int(v) for v in row) for row in self.mult)
        object.__setattr__(self, "mult", mult)
        I, J = self.sub.num_blocks, self.amb.num_blocks
        if len(mult) != I or any(len(row) != J for row in mult):
            raise AlgebraError(f"multiplicity matrix must be {I}x{J}")
        if any(v < 0 for row in mult for v in row):
            raise AlgebraError("multiplicities must be nonnegative")
        for j in range(J):
            fill = sum(mult[i][j] * self.sub.dims[i] for i in range(I))
            if fill != self.amb.dims[j]:
                raise AlgebraError(
                    f"column fit fails at ambient block {j}: {fill} != {self.amb.dims[j]}")
        for i in range(I):
            lhs = sum(mult[i][j] * self.amb.weights[j] / self.amb.dims[j] for j in range(J))
            rhs = self.sub.weights[i] / self.sub.dims[i]
            if lhs != rhs:
                raise AlgebraError(
                    f"trace compatibility fails at sub block {i}: "
                    f"sum_j k(i,j) beta_j/n_j = {lhs} but alpha_i/m_i = {rhs}")

    @property
    def mult_array(self) -> np.ndarray:
        return np.array(self.mult, dtype=int)

    @classmethod
    def from_json(cls, doc, cap=DEFAULT_DIM_CAP) -> "Inclusion":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if not isinstance(doc, dict) or set(doc) != {"sub", "amb", "mult"}:
            raise AlgebraError("inclusion document needs exactly 'sub', 'amb', 'mult'")
        return cls(TracialAlgebra.from_json(doc["sub"], cap=cap),
                   TracialAlgebra.from_json(doc["amb"], cap=cap),
                   tuple(tuple(row) for row in doc["mult"]))

    def to_json(self) -> dict:
        return {"sub": self.sub.to_json(), "amb": self.amb.to_json(),
                "mult": [list(row) for row in self.mult]}


def embed(inc: Inclusion, a: Element) -> Element:
    """Ambient block j is diag(a_i repeated k(i,j) times), i in order."""
    if a.algebra != inc.sub:
        raise AlgebraError("element does not live in the inclusion's subalgebra")
    blocks = []
    for j, n in enumerate(inc.amb.dims):
        out = np.zeros((n, n), dtype=complex)
        pos = 0
        for i, m in enumerate(inc.sub.dims):
            for _ in range(inc.mult[i][j]):
                out[pos:pos + m, pos:pos + m] = a.blocks[i]
                pos += m
        blocks.append(out)
    return Element(inc.amb, blocks, copy=False)


# ---------------------------------------------------------------- random sampling

def _ginibre(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def haar_unitary_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(_ginibre(rng, (n, n)))
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_unitary(algebra: TracialAlgebra, seed=None) -> Element:
    """Haar unitary in every block (QR of Ginibre with phase fix)."""
    rng = _rng(seed)
    return Element(algebra, [haar_unitary_matrix(n, rng) for n in algebra.dims], copy=False)


def random_element(algebra: TracialAlgebra, seed=None) -> Element:
    rng = _rng(seed)
    return Element(algebra, [_ginibre(rng, (n, n)) for n in algebra.dims], copy=False)


def random_selfadjoint(algebra: TracialAlgebra, seed=None) -> Element:
    x = random_element(algebra, seed)
    return (x + x.H) / 2


def random_tuple(algebra: TracialAlgebra, arity: int, seed=None, selfadjoint: bool = False) -> Tuple:
    rng = _rng(seed)
    blocks = [_ginibre(rng, (arity, n, n)) for n in algebra.dims]
    if selfadjoint:
        blocks = [(b + np.conj(np.swapaxes(b, 1, 2))) / 2 for b in blocks]
    return Tuple(algebra, blocks, copy=False)


def random_in_ball(algebra: TracialAlgebra, ball: BallSpec, seed=None, selfadjoint: bool = False) -> Tuple:
    """Random tuple with entry k of operator norm uniform in [0, r_k]."""
    rng = _rng(seed)
    x = random_tuple(algebra, ball.arity, rng, selfadjoint=selfadjoint)
    scale = ball.array * rng.uniform(0, 1, ball.arity) / np.maximum(op_norms(x), 1e-300)
    return Tuple(algebra, [b * scale[:, None, None] for b in x.blocks], copy=False)


# ---------------------------------------------------------------- matrix JSON

def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m, dtype=complex)]


def matrix_from_json(doc) -> np.ndarray:
    arr = np.asarray(doc, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise AlgebraError("matrix must be a square nested array of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]
