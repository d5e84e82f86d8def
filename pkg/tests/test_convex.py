import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from tracial_lab.algebra import (
    AlgebraError,
    BallSpec,
    Element,
    TracialAlgebra,
    Tuple,
    l2_inner,
    l2_norm,
    random_in_ball,
    random_tuple,
    trace,
)
from tracial_lab.convex import (
    Constant,
    FunctionPredicate,
    TracePolynomial,
    choose_t,
    envelope_gradient,
    finite_difference_gradient,
    gradient_lipschitz_check,
    half_norm_squared,
    inf_conv,
    lasry_lions,
    legendre,
    linear_functional,
    predicate_from_json,
    range_bound_check,
    sandwich_check,
    second_difference_check,
    semiconcavity_check,
    semiconvexity_check,
    spectral_diameter_check,
    strong_convexity_expansion_check,
    sup_conv,
)

M1 = TracialAlgebra.matrix(1)
M2 = TracialAlgebra.matrix(2)
BIG = BallSpec((50.0,))


def scalar(v):
    return Tuple.from_matrices(np.array([[complex(v)]]))


# ---------------------------------------------------------------- symbolic oracles

def _symbolic_envelopes():
    """Closed forms for phi = a s^2/2 along a real line, derived by completing squares in sympy."""
    s, z, w, t, a = sp.symbols("s z w t a", positive=True)
    phi = a * z ** 2 / 2
    inner = phi + (w - z) ** 2 / (4 * t)
    z_star = sp.solve(sp.diff(inner, z), z)[0]
    inner_val = sp.simplify(inner.subs(z, z_star))
    outer = inner_val - (s - w) ** 2 / (2 * t)
    w_star = sp.solve(sp.diff(outer, w), w)[0]
    ll = sp.simplify(outer.subs(w, w_star))
    infc = phi + (s - z) ** 2 / (2 * t)
    infc = sp.simplify(infc.subs(z, sp.solve(sp.diff(infc, z), z)[0]))
    supc = phi - (s - z) ** 2 / (2 * t)
    supc = sp.simplify(supc.subs(z, sp.solve(sp.diff(supc, z), z)[0]))
    return {k: sp.lambdify((s, t, a), v) for k, v in
            {"ll": ll, "ll_grad": sp.diff(ll, s), "inf": infc, "sup": supc}.items()}


SYM = _symbolic_envelopes()


def test_symbolic_oracle_sanity():
    # the double envelope of s^2/2 is s^2/(2(1+t))
    assert SYM["ll"](2.0, 0.5, 1.0) == pytest.approx(4.0 / 3.0)


@pytest.mark.parametrize("t", [0.1, 0.3])
def test_lasry_lions_quadratic_matches_symbolic(t):
    phi = half_norm_squared(M2, 1)
    psi = lasry_lions(phi, t, BIG, BIG.scaled(2.0))
    x = random_tuple(M2, 1, 3) * 0.5
    n2 = l2_norm(x) ** 2
    # the quadratic is radial, so the scalar formula applies with s = |x|
    assert psi(x) == pytest.approx(SYM["ll"](math.sqrt(n2), t, 1.0), abs=1e-9)
    g = envelope_gradient(psi, x).gradient
    assert g.allclose(x * (SYM["ll_grad"](1.0, t, 1.0)), atol=1e-7)


def test_inf_and_sup_conv_quadratic_match_symbolic():
    phi = half_norm_squared(M2, 1)
    x = random_tuple(M2, 1, 5) * 0.5
    s = l2_norm(x)
    assert inf_conv(phi, 0.3, BIG)(x) == pytest.approx(SYM["inf"](s, 0.3, 1.0), abs=1e-9)
    assert sup_conv(phi, 0.3, BIG)(x) == pytest.approx(SYM["sup"](s, 0.3, 1.0), abs=1e-9)


def test_convolutions_of_linear_functional():
    w = random_tuple(M2, 1, 7)
    phi = linear_functional(w)
    x = random_tuple(M2, 1, 8)
    t = 0.2
    base = l2_inner(x, w).real
    assert inf_conv(phi, t, BIG)(x) == pytest.approx(base - t / 2 * l2_norm(w) ** 2, abs=1e-9)
    assert sup_conv(phi, t, BIG)(x) == pytest.approx(base + t / 2 * l2_norm(w) ** 2, abs=1e-9)


def test_constant_is_fixed_by_all_envelopes():
    c = Constant(M2, 1, 1.7)
    x = random_in_ball(M2, BallSpec((1.0,)), 0)
    assert inf_conv(c, 0.3, BallSpec((1.0,)))(x) == pytest.approx(1.7)
    psi = lasry_lions(c, 0.3, BallSpec((1.0,)), BallSpec((2.0,)))
    assert psi(x) == pytest.approx(1.7, abs=1e-12)
    assert l2_norm(envelope_gradient(psi, x).gradient) <= 1e-9


def test_lasry_lions_linear_functional_closed_form():
    """With t|z| < r/2 and x in D_{r/2}: psi(x) = Re<x, z> - (t/2)|z|^2."""
    z = Tuple.from_matrices(np.array([[0.4, 0.1j], [0.2, -0.3]]))
    phi = linear_functional(z)
    t, r = 0.5, 1.0
    psi = lasry_lions(phi, t, BallSpec((r,)), BallSpec((2 * r,)))
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = random_in_ball(M2, BallSpec((r / 2,)), rng)
        assert psi(x) == pytest.approx(l2_inner(x, z).real - t / 2 * l2_norm(z) ** 2, abs=1e-10)
    assert envelope_gradient(psi, Tuple.zeros(M2, 1)).gradient.allclose(z, atol=1e-9)


def test_reduced_and_nested_routes_agree():
    phi = TracePolynomial(M2, 2, [(0.3, ((0, False), (1, True), (0, True), (1, False))),
                                  (0.2j, ((0, False), (1, False)))], "re")
    r, R = BallSpec.uniform(1.0, 2), BallSpec.uniform(1.5, 2)
    t = 0.25 / phi.semiconvexity(R)
    x = random_in_ball(M2, r, 4)
    a = lasry_lions(phi, t, r, R, method="reduced").solve(x)
    b = lasry_lions(phi, t, r, R, method="nested").solve_nested(x)
    assert a.value == pytest.approx(b.value, abs=1e-9)
    assert l2_norm(a.w - b.w) <= 1e-6


# ---------------------------------------------------------------- Legendre transforms

def _disk_grid(r, m=201):
    u = np.linspace(-r, r, m)
    re, im = np.meshgrid(u, u)
    pts = re + 1j * im
    return pts[np.abs(pts) <= r]


@pytest.mark.parametrize("z", [0.0, 0.3 - 0.2j])
def test_legendre_scalar_against_grid(z):
    psi = linear_functional(scalar(z)) if z else Constant(M1, 1, 0.0)
    phi0 = legendre(psi, BallSpec((1.0,)))
    grid = _disk_grid(1.0)
    for x in (0.5, -1.2 + 0.4j, 2j):
        grid_val = np.max((np.conj(x) * grid).real - (np.conj(z) * grid).real)
        assert phi0(scalar(x)) == pytest.approx(abs(x - z), abs=1e-8)
        assert phi0(scalar(x)) >= grid_val - 1e-12
        assert phi0(scalar(x)) - grid_val <= 2e-2


def test_legendre_of_half_norm_squared():
    phi0 = legendre(half_norm_squared(M2, 1), BallSpec((10.0,)))
    x = random_tuple(M2, 1, 2) * 0.3
    assert phi0(x) == pytest.approx(0.5 * l2_norm(x) ** 2, abs=1e-9)


def test_legendre_fenchel_young_and_lipschitz():
    ball = BallSpec((1.0,))
    psi = TracePolynomial(M2, 1, [(0.5, ((0, True), (0, False), (0, True), (0, False)))], "re")
    phi0 = legendre(psi, ball)
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = random_tuple(M2, 1, rng)
        y = random_in_ball(M2, ball, rng)
        assert phi0(x) + psi(y) >= l2_inner(x, y).real - 1e-9
    x0, x1 = random_tuple(M2, 1, rng), random_tuple(M2, 1, rng)
    assert abs(phi0(x0) - phi0(x1)) <= ball.norm * l2_norm(x0 - x1) + 1e-9


# ---------------------------------------------------------------- checks

def test_semiconvexity_check_examples():
    q = half_norm_squared(M2, 1)
    assert semiconvexity_check(q, 0.0, BallSpec((1.0,)), 20, 0, tol=1e-10).passed
    assert semiconvexity_check(q * -1.0, 1.0, BallSpec((1.0,)), 20, 0, tol=1e-10).passed
    assert not semiconvexity_check(q * -1.0, 0.5, BallSpec((1.0,)), 20, 0, tol=1e-10).passed
    assert semiconcavity_check(q, 1.0, BallSpec((1.0,)), 20, 0, tol=1e-10).passed


def test_second_difference_examples():
    lin = linear_functional(random_tuple(M2, 1, 1))
    assert second_difference_check(lin, 0.0, BallSpec((1.0,)), 20, 0, tol=1e-12).passed
    q = half_norm_squared(M2, 1)
    rep = second_difference_check(q, 1.0, BallSpec((1.0,)), 20, 0, tol=1e-12)
    assert rep.passed
    assert not second_difference_check(q, 0.5, BallSpec((1.0,)), 20, 0, tol=1e-12).passed


def test_strong_convexity_examples():
    q = half_norm_squared(M2, 1, c=2.0)
    rep = strong_convexity_expansion_check(q, 2.0, BallSpec((1.0,)), 20, 0)
    assert rep.passed and rep.max_violation == pytest.approx(0.0, abs=1e-12)
    shifted = q + linear_functional(random_tuple(M2, 1, 3))
    assert strong_convexity_expansion_check(shifted, 2.0, BallSpec((1.0,)), 20, 0).passed


def test_gradient_lipschitz_linear_is_constant():
    lin = linear_functional(random_tuple(M2, 1, 1))
    rep = gradient_lipschitz_check(lin, 0.0, BallSpec((1.0,)), 10, 0)
    assert rep.passed and rep.details["max_ratio"] <= 1e-12


def test_spectral_diameter_examples():
    ident = lambda x: x
    rep = spectral_diameter_check(ident, 1.0, M2, BallSpec((1.0,)), 20, 0)
    assert rep.passed and rep.max_violation == pytest.approx(0.0, abs=1e-12)
    tr = lambda x: Tuple.from_elements([M2.identity() * trace(x[0]).real])
    assert spectral_diameter_check(tr, 1.0, M2, BallSpec((1.0,)), 20, 0).passed
    a = np.array([[2.0, 1.0], [1.0, 0.0]])
    skew = lambda x: Tuple(M2, [a[None] @ x.blocks[0] @ a[None]])
    with pytest.raises(AlgebraError):
        spectral_diameter_check(skew, 5.0, M2, BallSpec((1.0,)), 5, 0)


def test_range_bound_examples():
    assert range_bound_check(lambda x: x, 1.0, M2, BallSpec((1.0,)), 20, 0).passed
    const = lambda x: Tuple.from_elements([M2.identity() * 0.7])
    rep = range_bound_check(const, 0.0, M2, BallSpec((1.0,)), 5, 0)
    assert rep.passed and rep.details["bound"] == pytest.approx(0.7)


def test_regularized_gradient_is_equivariant():
    from tracial_lab.suite import random_symmetric_poly
    phi = random_symmetric_poly(M2, 1, np.random.default_rng(2))
    r, R = BallSpec((1.0,)), BallSpec((1.5,))
    psi = lasry_lions(phi, 0.25 / phi.semiconvexity(R), r, R)
    F = lambda x: envelope_gradient(psi, x).gradient
    rep = spectral_diameter_check(F, 1.0 / psi.t, M2, r, 10, 0)
    assert rep.passed


def test_choose_t_meets_requested_accuracy():
    phi = TracePolynomial(M2, 1, [(0.4, ((0, True), (0, False))), (0.3, ((0, False),))], "re")
    r, R = BallSpec((1.0,)), BallSpec((1.5,))
    eps = 0.05
    t = choose_t(phi, r, R, eps)
    psi = lasry_lions(phi, t, r, R)
    lo, hi = psi.sandwich_bounds()
    assert -eps < lo and hi < eps
    rep = sandwich_check(phi, psi, r, 20, 0)
    assert rep.passed and max(abs(rep.details["min_diff"]), abs(rep.details["max_diff"])) < eps


def test_inf_conv_is_monotone_in_t():
    phi = TracePolynomial(M2, 1, [(0.5, ((0, True), (0, False), (0, True), (0, False))),
                                  (1.0, ((0, False),))], "re")
    x = random_in_ball(M2, BallSpec((1.0,)), 3)
    vals = [inf_conv(phi, t, BallSpec((1.0,)))(x) for t in (0.5, 0.2, 0.05)]
    assert vals[0] <= vals[1] + 1e-12 <= vals[2] + 2e-12


# ---------------------------------------------------------------- predicate grammar

def test_grammar_round_trip_and_rejections():
    doc = {"op": "add", "args": [
        {"op": "trace_poly", "part": "re", "terms": [{"coef": [1.0, 0.0], "word": ["x0*", "x0"]}]},
        {"op": "scale", "c": -2.0, "arg": {"op": "const", "value": 0.25}}]}
    phi = predicate_from_json(doc, M2, 1)
    x = random_tuple(M2, 1, 0)
    assert phi(x) == pytest.approx(l2_norm(x) ** 2 - 0.5)
    with pytest.raises(AlgebraError):
        predicate_from_json({**doc, "bogus": 1}, M2, 1)
    with pytest.raises(AlgebraError):
        predicate_from_json({"op": "exp", "arg": doc}, M2, 1)
    with pytest.raises(AlgebraError):
        predicate_from_json({"op": "trace_poly", "terms": [{"coef": 1, "word": ["x3"]}]}, M2, 1)


def test_sup_quantifier_scalar():
    # sup_{|y| <= 1} Re(conj(x) y) = |x|
    doc = {"op": "sup", "radii": [1.0], "arg": {
        "op": "trace_poly", "terms": [{"coef": 1.0, "word": ["x0*", "x1"]}]}}
    phi = predicate_from_json(doc, M1, 1)
    assert phi(scalar(0.6 - 0.8j)) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=10)
@given(st.integers(0, 2 ** 32 - 1))
def test_trace_polynomial_gradient_matches_finite_differences(seed):
    from tracial_lab.suite import random_symmetric_poly
    rng = np.random.default_rng(seed)
    alg = TracialAlgebra.matrix(int(rng.integers(1, 4)))
    arity = int(rng.integers(1, 3))
    phi = random_symmetric_poly(alg, arity, rng)
    x = random_in_ball(alg, BallSpec.uniform(1.0, arity), rng)
    g, gf = phi.gradient(x), finite_difference_gradient(phi.value, x)
    assert l2_norm(g - gf) <= 1e-6 * max(1.0, l2_norm(gf))


@settings(max_examples=10)
@given(st.integers(0, 2 ** 32 - 1))
def test_trace_polynomial_declared_constants_hold(seed):
    from tracial_lab.suite import random_symmetric_poly
    rng = np.random.default_rng(seed)
    phi = random_symmetric_poly(M2, 2, rng)
    ball = BallSpec.uniform(1.0, 2)
    L, c = phi.lipschitz(ball), phi.semiconvexity(ball)
    x0, x1 = random_in_ball(M2, ball, rng), random_in_ball(M2, ball, rng)
    assert abs(phi(x0) - phi(x1)) <= L * l2_norm(x0 - x1) + 1e-12
    assert semiconvexity_check(phi, c, ball, 5, rng, tol=1e-10).passed
    assert semiconcavity_check(phi, c, ball, 5, rng, tol=1e-10).passed


@settings(max_examples=6)
@given(st.integers(0, 2 ** 32 - 1))
def test_lasry_lions_output_is_two_sided_semiconvex(seed):
    from tracial_lab.suite import random_symmetric_poly
    rng = np.random.default_rng(seed)
    phi = random_symmetric_poly(M2, 1, rng)
    r, R = BallSpec((1.0,)), BallSpec((1.5,))
    psi = lasry_lions(phi, 0.25 / phi.semiconvexity(R), r, R)
    assert psi.certified
    assert semiconvexity_check(psi, 1 / psi.t, r, 5, rng, tol=1e-8).passed
    assert semiconcavity_check(psi, 1 / psi.t, r, 5, rng, tol=1e-8).passed
    assert sandwich_check(phi, psi, r, 5, rng).passed


def test_fd_error_near_stationary_point_is_truncation():
    """At a point where the envelope gradient nearly vanishes the FD discrepancy shrinks like h^2."""
    from tracial_lab.convex.checks import finite_difference_gradient
    from tracial_lab.suite import _rng, regularized_cases

    case = regularized_cases(2, 7)[0]
    rng = _rng(7, 700)
    x = [random_in_ball(case.phi.algebra, case.r, rng) for _ in range(2)][1]
    g = case.psi.gradient(x)
    errs = [l2_norm(g - finite_difference_gradient(case.psi.value, x, h=h)) for h in (1e-4, 1e-5)]
    assert l2_norm(g) < 1e-5
    assert 50 < errs[0] / errs[1] < 200
