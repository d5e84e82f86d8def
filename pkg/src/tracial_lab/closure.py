"""Definable and algebraic closure of finite-dimensional inclusions.

Ambient blocks j, j' are equivalent when they have the same size, the same
weight and the same multiplicity column. The definable closure of the image
of the subalgebra is spanned by p_C * iota(a) over classes C, where p_C is the
central projection onto the blocks of C. An independent oracle intersects the
fixed spaces of sampled automorphisms that fix the image pointwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import (
    AlgebraError,
    Element,
    Inclusion,
    Subalgebra,
    TracialAlgebra,
    complex_vector,
    embed,
    from_complex_vector,
    orthonormalize,
)

FIXED_TOL = 1e-8
DEFAULT_SAMPLES = 128


@dataclass(frozen=True)
class BlockClassPartition:
    classes: tuple[tuple[int, ...], ...]
    projections: tuple[Element, ...]


def block_classes(inc: Inclusion) -> BlockClassPartition:
    """Partition ambient blocks by (size, weight, multiplicity column), exactly."""
    keys: dict[tuple, list[int]] = {}
    for j, (n, w) in enumerate(zip(inc.amb.dims, inc.amb.weights)):
        col = tuple(row[j] for row in inc.mult)
        keys.setdefault((n, w, col), []).append(j)
    classes = tuple(tuple(v) for v in sorted(keys.values()))
    projs = tuple(inc.amb.central_projection(c) for c in classes)
    return BlockClassPartition(classes, projs)


@dataclass(frozen=True)
class ClosureResult:
    subalgebra: Subalgebra
    dim: int
    classes: tuple[tuple[int, ...], ...]

    def basis(self) -> list[Element]:
        return self.subalgebra.basis()


def image_basis(inc: Inclusion) -> list[Element]:
    return [embed(inc, e) for e in inc.sub.matrix_units()]


def dcl_dimension(inc: Inclusion) -> int:
    """sum over classes of sum_{i: k(i,j) > 0} m_i^2 for any j in the class."""
    part = block_classes(inc)
    total = 0
    for c in part.classes:
        j = c[0]
        total += sum(m * m for i, m in enumerate(inc.sub.dims) if inc.mult[i][j] > 0)
    return total


def dcl_finite(inc: Inclusion) -> ClosureResult:
    part = block_classes(inc)
    img = image_basis(inc)
    vecs = [complex_vector(p @ a) for p in part.projections for a in img]
    q = orthonormalize(np.stack(vecs, axis=1))
    sub = Subalgebra(inc.amb, q)
    expected = dcl_dimension(inc)
    if sub.dim != expected:
        raise AlgebraError(f"dcl span has dimension {sub.dim}, expected {expected}")
    return ClosureResult(sub, sub.dim, part.classes)


def acl_finite(inc: Inclusion) -> ClosureResult:
    """Every domain is compact at finite dimension, so acl is the whole algebra."""
    alg = inc.amb
    return ClosureResult(Subalgebra(alg, np.eye(alg.complex_dim, dtype=complex)),
                         alg.complex_dim, block_classes(inc).classes)


def _commutator_matrix(alg: TracialAlgebra, a: Element) -> np.ndarray:
    """Matrix of x -> xa - ax in isometric complex coordinates (row-major vec)."""
    mats = []
    for b in a.blocks:
        eye = np.eye(b.shape[0])
        mats.append(np.kron(eye, b.T) - np.kron(b, eye))
    return _block_diag(mats)


def _block_diag(mats) -> np.ndarray:
    size = sum(m.shape[0] for m in mats)
    out = np.zeros((size, size), dtype=complex)
    pos = 0
    for m in mats:
        k = m.shape[0]
        out[pos:pos + k, pos:pos + k] = m
        pos += k
    return out


def null_space(mat: np.ndarray, tol: float) -> np.ndarray:
    if mat.shape[0] > mat.shape[1]:
        # R has the same singular values and right singular vectors as mat
        mat = np.linalg.qr(mat, mode="r")
    _, s, vh = np.linalg.svd(mat, full_matrices=True)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T


def relative_commutant(basis_a, algebra: TracialAlgebra, tol: float = FIXED_TOL) -> Subalgebra:
    """Orthonormal basis of A' intersected with M, from the commutator null space."""
    elems = basis_a.basis() if isinstance(basis_a, Subalgebra) else list(basis_a)
    if not elems:
        return Subalgebra(algebra, np.eye(algebra.complex_dim, dtype=complex))
    mat = np.concatenate([_commutator_matrix(algebra, a) for a in elems], axis=0)
    return Subalgebra(algebra, null_space(mat, tol))


def _block_permutation_matrix(alg: TracialAlgebra, perm: list[int]) -> np.ndarray:
    """Coordinates map of x -> y with y_{perm[j]} = x_j (blocks in one class share size and weight)."""
    offsets = np.concatenate([[0], np.cumsum([n * n for n in alg.dims])])
    D = alg.complex_dim
    P = np.zeros((D, D))
    for j, pj in enumerate(perm):
        size = alg.dims[j] ** 2
        P[offsets[pj]:offsets[pj] + size, offsets[j]:offsets[j] + size] = np.eye(size)
    return P


def _conjugation_matrix(alg: TracialAlgebra, v: Element) -> np.ndarray:
    """Coordinates map of x -> v x v^* for a unitary v."""
    # vec(v x v^*) = (v kron conj(v)) vec(x) in row-major order
    return _block_diag([np.kron(b, b.conj()) for b in v.blocks])


def _unitary_exp(h: Element) -> Element:
    """exp(i h) for self-adjoint h, blockwise via eigh."""
    blocks = []
    for b in h.blocks:
        lam, vec = np.linalg.eigh((b + b.conj().T) / 2)
        blocks.append((vec * np.exp(1j * lam)) @ vec.conj().T)
    return Element(h.algebra, blocks, copy=False)


def sample_fixing_automorphisms(inc: Inclusion, samples: int, seed=0):
    """Yield coordinate matrices of automorphisms that fix iota(A) pointwise."""
    rng = np.random.default_rng(seed)
    alg = inc.amb
    part = block_classes(inc)
    comm = relative_commutant(image_basis(inc), alg)
    for _ in range(samples):
        perm = list(range(alg.num_blocks))
        for c in part.classes:
            shuffled = list(rng.permutation(c))
            for src, dst in zip(c, shuffled):
                perm[src] = int(dst)
        coeffs = rng.standard_normal(comm.dim) + 1j * rng.standard_normal(comm.dim)
        c_elem = from_complex_vector(alg, comm.q @ coeffs)
        h = (c_elem + c_elem.H) / 2
        v = _unitary_exp(h)
        yield _conjugation_matrix(alg, v) @ _block_permutation_matrix(alg, perm)


def automorphism_fixed_oracle(inc: Inclusion, samples: int = DEFAULT_SAMPLES, seed=0,
                              tol: float = FIXED_TOL) -> Subalgebra:
    """Common fixed space of sampled automorphisms fixing the image of the subalgebra."""
    alg = inc.amb
    eye = np.eye(alg.complex_dim)
    rows = [theta - eye for theta in sample_fixing_automorphisms(inc, samples, seed)]
    if not rows:
        return Subalgebra(alg, np.eye(alg.complex_dim, dtype=complex))
    return Subalgebra(alg, null_space(np.concatenate(rows, axis=0), tol))


def random_inclusion(seed=None, max_dim: int = 36, max_sub_blocks: int = 3,
                     max_amb_blocks: int = 4, max_tries: int = 1000) -> Inclusion:
    """Random inclusion with repeated columns so that nontrivial classes occur.

    Ambient weights are drawn as small rationals; the subalgebra weights follow
    from trace compatibility and therefore sum to one automatically.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        I = int(rng.integers(1, max_sub_blocks + 1))
        m = [int(v) for v in rng.integers(1, 3, size=I)]
        n_distinct = int(rng.integers(1, max_amb_blocks + 1))
        cols = []
        for _ in range(n_distinct):
            col = [int(v) for v in rng.integers(0, 3, size=I)]
            if sum(col) == 0:
                col[int(rng.integers(I))] = 1
            cols.append(col)
        J = int(rng.integers(n_distinct, max_amb_blocks + 1))
        cols += [cols[int(rng.integers(n_distinct))] for _ in range(J - n_distinct)]
        order = rng.permutation(J)
        cols = [cols[o] for o in order]
        mult = [[cols[j][i] for j in range(J)] for i in range(I)]
        if any(sum(row) == 0 for row in mult):
            continue
        n = [sum(mult[i][j] * m[i] for i in range(I)) for j in range(J)]
        if sum(v * v for v in n) > max_dim:
            continue
        # equal raw weights within repeated columns half of the time
        raw = [int(v) for v in rng.integers(1, 4, size=J)]
        if rng.random() < 0.5:
            first = {}
            for j in range(J):
                key = (tuple(cols[j]),)
                raw[j] = first.setdefault(key, raw[j])
        total = sum(raw)
        beta = [Fraction(r, total) for r in raw]
        alpha = [m[i] * sum(mult[i][j] * beta[j] / n[j] for j in range(J)) for i in range(I)]
        sub = TracialAlgebra(tuple(m), tuple(alpha))
        amb = TracialAlgebra(tuple(n), tuple(beta))
        return Inclusion(sub, amb, tuple(tuple(r) for r in mult))
    raise AlgebraError("could not draw an inclusion within the dimension cap")
