import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tracial_lab.algebra import AlgebraError, BallSpec, TracialAlgebra, Tuple, random_selfadjoint, random_tuple, random_unitary
from tracial_lab.transport import (
    OrbitType,
    assignment_oracle,
    brute_force_permutation,
    cayley,
    cost_orbit,
    permutation_unitary,
    sorted_eigen_cost,
    wasserstein,
)


def d(*v):
    return np.diag(np.array(v, dtype=float))


def test_cost_examples():
    assert cost_orbit(d(0, 2), d(1, 3)).value == pytest.approx(3.0, abs=1e-9)
    assert cost_orbit(d(0, 1), d(1, 0)).value == pytest.approx(0.5, abs=1e-9)
    x = random_tuple(TracialAlgebra.matrix(3), 2, 4)
    res = cost_orbit(x, x)
    assert res.value == pytest.approx(np.sum(np.abs(x.blocks[0]) ** 2) / 3, abs=1e-9)


def test_wasserstein_examples():
    w = wasserstein(d(0, 2), d(1, 3))
    assert w.distance == pytest.approx(1.0, abs=1e-7)
    x = Tuple.from_elements([random_selfadjoint(TracialAlgebra.matrix(3), 1)])
    assert wasserstein(x, x).distance <= 1e-7
    u = random_unitary(x.algebra, 2)
    assert wasserstein(x, x.conjugate_by(u)).distance <= 1e-7


def test_assignment_oracle_examples():
    assert assignment_oracle(d(1, 2), d(1, 2)).value == pytest.approx(2.5)
    assert assignment_oracle(d(0, 2), d(1, 3)).brute_value == pytest.approx(3.0)
    assert assignment_oracle(d(1, -1), d(-1, 1)).brute_value == pytest.approx(1.0)


def test_frozen_oracle_values():
    # computed once by sorted eigenvalue pairing and n! enumeration respectively
    x = random_selfadjoint(TracialAlgebra.matrix(4), 1).blocks[0]
    y = random_selfadjoint(TracialAlgebra.matrix(4), 2).blocks[0]
    assert sorted_eigen_cost(x, y) == pytest.approx(1.6987000302280872, abs=1e-12)
    val, perm = brute_force_permutation(d(0.3, -1, 2)[None], d(1, 0.5, -2)[None])
    assert val == pytest.approx(4.15 / 3)
    assert perm == (1, 2, 0)


def test_lsa_cross_check_matches_brute_force():
    rng = np.random.default_rng(0)
    for n in range(2, 7):
        X = np.stack([np.diag(rng.standard_normal(n)) for _ in range(2)]).astype(complex)
        Y = np.stack([np.diag(rng.standard_normal(n)) for _ in range(2)]).astype(complex)
        res = assignment_oracle(X, Y)
        assert res.lsa_value == pytest.approx(res.brute_value, abs=1e-12)
        u = permutation_unitary(res.permutation)
        aligned = u[None] @ Y @ u.conj().T[None]
        assert np.vdot(X, aligned).real / n == pytest.approx(res.brute_value, abs=1e-12)


def test_commuting_tuple_optimizer_reaches_permutation_max():
    rng = np.random.default_rng(3)
    for n in (2, 3, 4):
        X = np.stack([np.diag(rng.uniform(-1, 1, n)) for _ in range(2)]).astype(complex)
        Y = np.stack([np.diag(rng.uniform(-1, 1, n)) for _ in range(2)]).astype(complex)
        assert cost_orbit(X, Y).value == pytest.approx(assignment_oracle(X, Y).brute_value, abs=1e-8)


def test_oracle_rejects_large_n():
    with pytest.raises(AlgebraError):
        assignment_oracle(np.eye(9), np.eye(9))


def test_cayley_is_unitary():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    a = a - a.conj().T
    q = cayley(a, 0.7)
    assert np.allclose(q @ q.conj().T, np.eye(4), atol=1e-12)


def test_orbit_type_rejects_direct_sums_and_outside_ball():
    from fractions import Fraction
    alg = TracialAlgebra((1, 1), (Fraction(1, 2), Fraction(1, 2)))
    with pytest.raises(AlgebraError):
        OrbitType(random_tuple(alg, 1, 0))
    with pytest.raises(AlgebraError):
        OrbitType(Tuple.from_matrices(d(0, 3)), BallSpec((1.0,)))


def test_more_restarts_never_lower_the_value():
    x = random_tuple(TracialAlgebra.matrix(3), 2, 8)
    y = random_tuple(TracialAlgebra.matrix(3), 2, 9)
    vals = [cost_orbit(x, y, restarts=k).value for k in (1, 3, 6)]
    assert vals[0] <= vals[1] <= vals[2]


@settings(max_examples=10)
@given(st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_hermitian_pair_matches_oracle_and_is_symmetric(n, seed):
    alg = TracialAlgebra.matrix(n)
    x, y = random_selfadjoint(alg, seed).blocks[0], random_selfadjoint(alg, seed + 1).blocks[0]
    c_xy = cost_orbit(x, y).value
    assert c_xy == pytest.approx(assignment_oracle(x, y).value, abs=1e-6)
    assert c_xy == pytest.approx(cost_orbit(y, x).value, abs=1e-7)


@settings(max_examples=10)
@given(st.integers(0, 2 ** 32 - 1))
def test_cost_is_conjugation_invariant(seed):
    alg = TracialAlgebra.matrix(3)
    x, y = random_selfadjoint(alg, seed), random_selfadjoint(alg, seed + 1)
    X, Y = Tuple.from_elements([x]), Tuple.from_elements([y])
    u, v = random_unitary(alg, seed + 2), random_unitary(alg, seed + 3)
    base = cost_orbit(X, Y).value
    assert cost_orbit(X.conjugate_by(u), Y.conjugate_by(v)).value == pytest.approx(base, abs=1e-7)
