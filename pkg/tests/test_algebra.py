from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tracial_lab.algebra import (
    AlgebraError,
    BallSpec,
    Element,
    Inclusion,
    Subalgebra,
    TracialAlgebra,
    Tuple,
    conditional_expectation,
    dist_to_ball,
    embed,
    from_real_vector,
    generated_algebra,
    l2_inner,
    l2_norm,
    op_norm,
    project_ball,
    random_element,
    random_tuple,
    random_unitary,
    to_real_vector,
    trace,
    trace_exact,
)

M2 = TracialAlgebra.matrix(2)
SEEDS = st.integers(0, 2 ** 32 - 1)


def naive_trace(alg, blocks):
    total = 0j
    for w, n, b in zip(alg.weights, alg.dims, blocks):
        s = 0j
        for i in range(n):
            s += b[i][i]
        total += float(w) * s / n
    return total


def test_trace_examples():
    assert trace(M2.identity()) == pytest.approx(1.0)
    assert trace(Element(M2, [np.diag([1.0, 3.0])])) == pytest.approx(2.0)
    alg = TracialAlgebra((1, 1), (Fraction(1, 4), Fraction(3, 4)))
    assert trace(Element(alg, [np.array([[2.0]]), np.array([[0.0]])])) == pytest.approx(0.5)


def test_trace_exact_is_rational():
    alg = TracialAlgebra((1, 2), (Fraction(1, 3), Fraction(2, 3)))
    assert trace_exact(alg.identity()) == Fraction(1)


def test_inner_product_examples():
    assert l2_inner(M2.identity(), M2.identity()) == pytest.approx(1.0)
    e11 = Element(M2, [np.diag([1.0, 0.0])])
    assert l2_inner(e11, e11) == pytest.approx(0.5)


@given(SEEDS)
def test_inner_product_matches_double_loop_oracle(seed):
    alg = TracialAlgebra((1, 2, 3), (Fraction(1, 6), Fraction(1, 3), Fraction(1, 2)))
    x, y = random_element(alg, seed), random_element(alg, seed + 1)
    prod = [a.conj().T @ b for a, b in zip(x.blocks, y.blocks)]
    assert abs(l2_inner(x, y) - naive_trace(alg, prod)) <= 1e-12


def test_op_norm_examples():
    assert op_norm(M2.identity()) == pytest.approx(1.0)
    assert op_norm(Element(M2, [np.diag([3.0, -4.0])])) == pytest.approx(4.0)


def test_project_ball_examples():
    m1 = TracialAlgebra.matrix(1)
    x = Tuple.from_matrices(np.array([[5.0]]))
    assert np.allclose(project_ball(x, BallSpec((2.0,))).blocks[0], 2.0)
    assert dist_to_ball(x, BallSpec((2.0,))) == pytest.approx(3.0)
    inside = Tuple.from_matrices(np.diag([0.3, -0.5]))
    assert project_ball(inside, BallSpec((1.0,))).allclose(inside)
    assert dist_to_ball(inside, BallSpec((1.0,))) == 0.0
    assert m1.is_factor


def test_project_ball_beats_random_search():
    """diag(3, 0.5) projects to diag(1, 0.5); no random ball point is closer."""
    x = Tuple.from_matrices(np.diag([3.0, 0.5]))
    ball = BallSpec((1.0,))
    p = project_ball(x, ball)
    assert np.allclose(p.blocks[0][0], np.diag([1.0, 0.5]))
    d = l2_norm(x - p)
    rng = np.random.default_rng(0)
    from tracial_lab.algebra import random_in_ball
    for _ in range(2000):
        assert l2_norm(x - random_in_ball(M2, ball, rng)) >= d - 1e-12


@given(SEEDS)
def test_projection_is_idempotent_and_in_ball(seed):
    alg = TracialAlgebra((2, 3), (Fraction(1, 2), Fraction(1, 2)))
    ball = BallSpec((0.7, 1.3))
    x = random_tuple(alg, 2, seed) * 3.0
    p = project_ball(x, ball)
    assert ball.contains(p)
    assert project_ball(p, ball).allclose(p)


@given(SEEDS)
def test_real_vectorization_is_isometric(seed):
    alg = TracialAlgebra((1, 2), (Fraction(1, 3), Fraction(2, 3)))
    x, y = random_tuple(alg, 2, seed), random_tuple(alg, 2, seed + 7)
    assert np.dot(to_real_vector(x), to_real_vector(y)) == pytest.approx(l2_inner(x, y).real, abs=1e-12)
    assert from_real_vector(alg, 2, to_real_vector(x)).allclose(x)


def test_conditional_expectation_diagonal():
    diag = [Element(M2, [np.diag([1.0, 0.0])]), Element(M2, [np.diag([0.0, 1.0])])]
    z = Element(M2, [np.array([[1.0, 2.0], [3.0, 4.0]])])
    assert conditional_expectation(diag, z).allclose(Element(M2, [np.diag([1.0, 4.0])]))
    d = Element(M2, [np.diag([2.0, -1.0])])
    assert conditional_expectation(diag, d).allclose(d)


def test_conditional_expectation_rejects_non_algebra():
    e12 = Element(M2, [np.array([[0.0, 1.0], [0.0, 0.0]])])
    with pytest.raises(AlgebraError):
        conditional_expectation([M2.identity(), e12], M2.identity())


@given(SEEDS)
def test_conditional_expectation_bimodule_property(seed):
    alg = TracialAlgebra.matrix(3)
    sub = Subalgebra.from_elements(generated_algebra(Tuple.from_elements([
        Element(alg, [np.diag([1.0, 1.0, 2.0])])])))
    z = random_element(alg, seed)
    a = sub.project(random_element(alg, seed + 1))
    assert sub.project(a @ z).allclose(a @ sub.project(z), atol=1e-10)
    assert trace(sub.project(z)) == pytest.approx(trace(z), abs=1e-12)


def test_generated_algebra_examples():
    assert len(generated_algebra(Tuple.from_elements([M2.identity()]))) == 1
    assert len(generated_algebra(Tuple.from_matrices(np.diag([1.0, 2.0])))) == 2
    e12 = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert len(generated_algebra(Tuple.from_matrices(e12))) == 4


def test_inclusion_validation():
    sub = TracialAlgebra.matrix(1)
    amb = TracialAlgebra((1, 2), (Fraction(1, 3), Fraction(2, 3)))
    inc = Inclusion(sub, amb, ((1, 2),))
    assert embed(inc, sub.identity()).allclose(amb.identity())
    with pytest.raises(AlgebraError):
        Inclusion(sub, amb, ((1, 1),))
    bad_amb = TracialAlgebra((1, 2), (Fraction(1, 2), Fraction(1, 2)))
    bad_sub = TracialAlgebra((1, 1), (Fraction(1, 4), Fraction(3, 4)))
    with pytest.raises(AlgebraError):
        Inclusion(bad_sub, bad_amb, ((1, 0), (0, 2)))


def test_inclusion_json_round_trip_and_strict_keys():
    doc = {"sub": {"blocks": [{"dim": 1, "weight": "1"}]},
           "amb": {"blocks": [{"dim": 1, "weight": "1/3"}, {"dim": 2, "weight": "2/3"}]},
           "mult": [[1, 2]]}
    inc = Inclusion.from_json(doc)
    assert inc.to_json() == doc
    with pytest.raises(AlgebraError):
        Inclusion.from_json({**doc, "extra": 1})
    with pytest.raises(AlgebraError):
        TracialAlgebra.from_json({"blocks": [{"dim": 2, "weight": "1/2"}]})


def test_random_generators_are_deterministic():
    u1, u2 = random_unitary(M2, 5), random_unitary(M2, 5)
    assert np.array_equal(u1.blocks[0], u2.blocks[0])
    assert (u1 @ u1.H).allclose(M2.identity())


def test_haar_first_moment():
    rng = np.random.default_rng(1)
    vals = [trace(random_unitary(M2, rng)) for _ in range(10000)]
    assert abs(np.mean(vals)) <= 0.05


@given(SEEDS)
def test_embed_is_star_homomorphism(seed):
    from tracial_lab.closure import random_inclusion
    inc = random_inclusion(seed)
    a, b = random_element(inc.sub, seed), random_element(inc.sub, seed + 1)
    assert embed(inc, a @ b).allclose(embed(inc, a) @ embed(inc, b), atol=1e-10)
    assert embed(inc, a.H).allclose(embed(inc, a).H)
    assert trace(embed(inc, a)) == pytest.approx(trace(a), abs=1e-12)


def test_inclusion_rejects_swapped_weight_relation():
    F = Fraction
    sub = TracialAlgebra.from_blocks([(1, F(1, 3)), (1, F(2, 3))])
    amb = TracialAlgebra.from_blocks([(2, F(1, 6)), (1, F(5, 6))])
    mult = ((1, 0), (1, 1))
    # satisfies sum_j k(i,j) alpha_j / n_j = beta_i / m_i (weights on the wrong side) only
    assert F(1, 3) / 2 == F(1, 6) and F(1, 3) / 2 + F(2, 3) == F(5, 6)
    with pytest.raises(AlgebraError):
        Inclusion(sub, amb, mult)
    ok_amb = TracialAlgebra.from_blocks([(2, F(2, 3)), (1, F(1, 3))])
    assert Inclusion(sub, ok_amb, mult).mult == mult
