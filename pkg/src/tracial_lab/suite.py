"""The acceptance suite as reusable experiment functions.

Each criterion returns a CriterionResult with one summary row per instance.
The same code backs `tracial-lab checks` and tests/test_acceptance.py.
Sizes come from a scale: "full" meets the acceptance counts, "quick" is a
smoke-sized run of the same code paths.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .algebra import (
    BallSpec,
    Element,
    op_norm,
    TracialAlgebra,
    Tuple,
    generated_algebra,
    l2_norm,
    random_in_ball,
    random_selfadjoint,
    random_tuple,
    Subalgebra,
)
from .closure import acl_finite, automorphism_fixed_oracle, dcl_finite, random_inclusion
from .convex import (
    TracePolynomial,
    envelope_gradient,
    gradient_ball_check,
    gradient_fd_check,
    gradient_lipschitz_check,
    lasry_lions,
    quadratic_expansion_check,
    range_bound_check,
    sandwich_check,
    second_difference_check,
    semiconcavity_check,
    semiconvexity_check,
    spectral_diameter_check,
    strong_convexity_expansion_check,
)
from .duality import (
    admissibility_check,
    build_dual_pair,
    definable_realization_demo,
    displacement_interpolation_check,
    duality_gap,
    word_polynomial,
)
from .transport import assignment_oracle, cost_orbit, permutation_unitary, wasserstein

SCALES = {
    "full": dict(inclusions=30, transport=50, triples=20, predicates=10, fd_points=100,
                 pairs=40, inequality=200, duality=25, grid=100, realize=20, interpolate=15,
                 samples=30),
    "quick": dict(inclusions=4, transport=6, triples=3, predicates=2, fd_points=6,
                  pairs=6, inequality=8, duality=2, grid=12, realize=3, interpolate=3,
                  samples=4),
}


@dataclass
class Row:
    instance_id: str
    command: str
    check: str
    C: float | None = None
    d: float | None = None
    gap: float | None = None
    dim_a: int | None = None
    dim_b: int | None = None
    value: float | None = None
    bound: float | None = None
    passed: bool = True


CSV_COLUMNS = tuple(Row.__dataclass_fields__)


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    summary: dict
    rows: list[Row] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"key": self.key, "title": self.title, "passed": self.passed,
                "summary": self.summary, "rows": [asdict(r) for r in self.rows]}


def _rng(seed, tag: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), tag])


def _worst(values, default=-math.inf) -> float:
    values = list(values)
    return float(max(values)) if values else default


# ---------------------------------------------------------------- predicate library

def random_symmetric_poly(algebra: TracialAlgebra, arity: int, rng, terms: int = 3,
                          max_len: int = 4, scale: float = 0.3) -> TracePolynomial:
    """Re of a random trace polynomial, closed under toggling every star.

    The toggle symmetry gives phi(x^*) = phi(x), so gradients of regularized
    versions are self-adjoint at self-adjoint points.
    """
    out = []
    for _ in range(terms):
        length = int(rng.integers(2, max_len + 1))
        word = tuple((int(rng.integers(arity)), bool(rng.integers(2))) for _ in range(length))
        c = complex(*(scale * rng.standard_normal(2)))
        out.append((c, word))
        out.append((c, tuple((i, not s) for i, s in word)))
    return TracePolynomial(algebra, arity, out, "re")


@dataclass
class RegularizedCase:
    name: str
    phi: TracePolynomial
    psi: object
    t: float
    r: BallSpec
    R: BallSpec


def regularized_cases(count: int, seed) -> list[RegularizedCase]:
    """Trace polynomials on M_2 / M_3 with certified Lasry-Lions envelopes."""
    rng = _rng(seed, 30)
    cases = []
    for i in range(count):
        n = 2 + i % 2
        arity = 1 + (i // 2) % 2
        alg = TracialAlgebra.matrix(n)
        phi = random_symmetric_poly(alg, arity, rng)
        r = BallSpec.uniform(1.0, arity)
        R = BallSpec.uniform(1.5, arity)
        sx = phi.semiconvexity(R)
        t = min(0.5, 0.25 / sx) if sx > 0 else 0.5
        psi = lasry_lions(phi, t, r, R, seed=i)
        cases.append(RegularizedCase(f"poly{i}_M{n}_k{arity}", phi, psi, t, r, R))
    return cases


# ---------------------------------------------------------------- criteria

def criterion_closure(seed=0, scale="full") -> CriterionResult:
    N = SCALES[scale]["inclusions"]
    rows = []
    for i in range(N):
        inc = random_inclusion(seed=[int(seed), 10, i])
        dcl = dcl_finite(inc)
        oracle = automorphism_fixed_oracle(inc, seed=[int(seed), 11, i])
        acl = acl_finite(inc)
        span_ok = dcl.subalgebra.contains_span(oracle, tol=1e-8) and oracle.contains_span(dcl.subalgebra, tol=1e-8)
        ok = dcl.dim == oracle.dim and span_ok and acl.dim == inc.amb.complex_dim
        rows.append(Row(f"inclusion{i}", "checks", "closure", dim_a=dcl.dim, dim_b=oracle.dim,
                        value=float(acl.dim), bound=float(inc.amb.complex_dim), passed=bool(ok)))
    passed = all(r.passed for r in rows)
    return CriterionResult("closure", "dcl matches the automorphism-fixed oracle; acl is everything",
                           passed, {"instances": N, "failures": sum(not r.passed for r in rows)}, rows)


def criterion_transport(seed=0, scale="full") -> CriterionResult:
    s = SCALES[scale]
    rng = _rng(seed, 20)
    rows = []
    worst_oracle = 0.0
    for i in range(s["transport"]):
        n = 1 + i % 6
        alg = TracialAlgebra.matrix(n)
        x = random_selfadjoint(alg, rng).blocks[0]
        y = random_selfadjoint(alg, rng).blocks[0]
        res = cost_orbit(x, y, restarts=20, seed=int(seed))
        ref = assignment_oracle(x, y).value
        err = abs(res.value - ref)
        worst_oracle = max(worst_oracle, err)
        rows.append(Row(f"pair{i}", "checks", "transport.oracle", C=res.value, value=err, bound=1e-6,
                        passed=bool(err <= 1e-6)))
    worst_sym = worst_tri = -math.inf
    for i in range(s["triples"]):
        n = 2 + i % 4
        alg = TracialAlgebra.matrix(n)
        X, Y, Z = (random_selfadjoint(alg, rng) for _ in range(3))
        X, Y, Z = (Tuple.from_elements([e]) for e in (X, Y, Z))
        dxy = wasserstein(X, Y, seed=int(seed)).distance
        dyx = wasserstein(Y, X, seed=int(seed)).distance
        dyz = wasserstein(Y, Z, seed=int(seed)).distance
        dxz = wasserstein(X, Z, seed=int(seed)).distance
        sym = abs(dxy - dyx)
        tri = dxz - dxy - dyz
        worst_sym, worst_tri = max(worst_sym, sym), max(worst_tri, tri)
        rows.append(Row(f"triple{i}.sym", "checks", "transport.symmetry", d=dxy, value=sym, bound=1e-7,
                        passed=bool(sym <= 1e-7)))
        rows.append(Row(f"triple{i}.tri", "checks", "transport.triangle", d=dxz, value=tri, bound=1e-6,
                        passed=bool(tri <= 1e-6)))
    passed = all(r.passed for r in rows)
    return CriterionResult("transport", "orbit optimizer matches the assignment oracle; d_W is a metric",
                           passed, {"max_oracle_error": worst_oracle, "max_symmetry_error": worst_sym,
                                    "max_triangle_excess": worst_tri}, rows)


def criterion_regularization(seed=0, scale="full") -> CriterionResult:
    s = SCALES[scale]
    rows = []
    for k, case in enumerate(regularized_cases(s["predicates"], seed)):
        psi, c = case.psi, 1.0 / case.t
        reps = [
            semiconvexity_check(psi, c, case.r, s["samples"], _rng(seed, 300 + k), tol=1e-8),
            semiconcavity_check(psi, c, case.r, s["samples"], _rng(seed, 400 + k), tol=1e-8),
            sandwich_check(case.phi, psi, case.r, s["samples"], _rng(seed, 500 + k), tol=0.0),
            gradient_ball_check(psi, case.r, s["samples"], _rng(seed, 600 + k), tol=1e-6),
        ]
        for rep in reps:
            rows.append(Row(case.name, "checks", f"regularize.{rep.name}", value=rep.max_violation,
                            bound=rep.tol, passed=rep.passed))
        rows.append(Row(case.name, "checks", "regularize.certified", value=2 * case.t * case.phi.semiconvexity(case.R),
                        bound=1.0, passed=bool(psi.certified)))
    passed = all(r.passed for r in rows)
    return CriterionResult("regularization", "Lasry-Lions output is 1/t-semiconvex and semiconcave, "
                           "sandwiched, with gradients in the expected ball", passed,
                           {"predicates": s["predicates"], "failures": sum(not r.passed for r in rows)}, rows)


def criterion_gradient(seed=0, scale="full") -> CriterionResult:
    s = SCALES[scale]
    cases = regularized_cases(s["predicates"], seed)
    rows = []
    per_case = max(1, math.ceil(s["fd_points"] / len(cases)))
    total_fd = 0
    for k, case in enumerate(cases):
        rng = _rng(seed, 700 + k)
        pts = [random_in_ball(case.phi.algebra, case.r, rng) for _ in range(per_case)]
        total_fd += len(pts)
        c = 1.0 / case.t
        reps = [
            gradient_fd_check(case.psi, pts, tol=1e-4),
            quadratic_expansion_check(case.psi, c, case.r, s["samples"], _rng(seed, 800 + k), tol=1e-8),
            gradient_lipschitz_check(case.psi, c, case.r, s["samples"], _rng(seed, 900 + k), tol=1e-6),
        ]
        for rep in reps:
            rows.append(Row(case.name, "checks", f"gradient.{rep.name}", value=rep.max_violation,
                            bound=rep.tol, passed=rep.passed))
    passed = all(r.passed for r in rows)
    return CriterionResult("gradient", "envelope gradients match finite differences and are 1/t-Lipschitz",
                           passed, {"fd_points": total_fd, "failures": sum(not r.passed for r in rows)}, rows)


def strongly_convex_poly(algebra, arity, c: float, rng) -> TracePolynomial:
    """(c/2)|x|^2 + sum_k a_k tau((x_k^* x_k)^2) + Re<b, x>, c-strongly convex for a_k >= 0."""
    terms = []
    for k in range(arity):
        terms.append((c / 2, ((k, True), (k, False))))
        terms.append((float(rng.uniform(0, 0.5)), ((k, True), (k, False), (k, True), (k, False))))
    b = random_tuple(algebra, arity, rng)
    for k in range(arity):
        terms.append((1.0, ((arity + k, True), (k, False))))
    return TracePolynomial(algebra, arity, terms, "re", constants=b.entries)


def criterion_inequalities(seed=0, scale="full") -> CriterionResult:
    s = SCALES[scale]
    N = s["inequality"]
    cases = regularized_cases(4 if scale == "full" else 2, seed)
    per = math.ceil(N / len(cases))
    rows = []
    stats = {}

    def record(name, rep, inst):
        rows.append(Row(inst, "checks", f"inequality.{name}", value=rep.max_violation, bound=rep.tol,
                        passed=rep.passed))
        st = stats.setdefault(name, {"instances": 0, "max_violation": -math.inf})
        st["instances"] += rep.samples
        st["max_violation"] = max(st["max_violation"], rep.max_violation)

    for k, case in enumerate(cases):
        rep = second_difference_check(case.psi, 1.0 / case.t, case.r, per, _rng(seed, 1000 + k), tol=1e-8)
        record("second_difference", rep, case.name)
    rng = _rng(seed, 1100)
    for k in range(4):
        alg = TracialAlgebra.matrix(2 + k % 3)
        arity = 1 + k % 2
        c = float(rng.uniform(0.5, 2.0))
        phi = strongly_convex_poly(alg, arity, c, rng)
        rep = strong_convexity_expansion_check(phi, c, BallSpec.uniform(2.0, arity), math.ceil(N / 4),
                                               _rng(seed, 1200 + k), tol=1e-6)
        record("strong_convexity", rep, f"strong{k}")
    for k, case in enumerate(cases):
        F = lambda x, psi=case.psi: envelope_gradient(psi, x).gradient
        L = 1.0 / case.t
        rep = spectral_diameter_check(F, L, case.phi.algebra, case.r, per, _rng(seed, 1300 + k), tol=1e-6)
        record("spectral_diameter", rep, case.name)
        rep = range_bound_check(F, L, case.phi.algebra, case.r, per, _rng(seed, 1400 + k), tol=1e-6)
        record("range_bound", rep, case.name)
    passed = all(r.passed for r in rows) and all(v["instances"] >= N for v in stats.values())
    return CriterionResult("inequalities", "second difference, strong convexity expansion, spectral "
                           "diameter and range bounds", passed, stats, rows)


def _commuting_pair(n: int, arity: int, rng):
    alg = TracialAlgebra.matrix(n)
    X = Tuple(alg, [np.stack([np.diag(rng.uniform(-1, 1, n)) for _ in range(arity)]).astype(complex)])
    Y = Tuple(alg, [np.stack([np.diag(rng.uniform(-1, 1, n)) for _ in range(arity)]).astype(complex)])
    return X, Y


def criterion_duality(seed=0, scale="full") -> CriterionResult:
    s = SCALES[scale]
    rng = _rng(seed, 40)
    rows = []
    worst_margin, worst_gap = math.inf, -math.inf
    for i in range(s["duality"]):
        n = 2 + i % 5
        arity = 1 if i % 5 else 2
        X, Y = _commuting_pair(n, arity, rng)
        ball = BallSpec.uniform(1.0, arity)
        res = cost_orbit(X.blocks[0], Y.blocks[0], restarts=20, seed=int(seed))
        oracle = assignment_oracle(X.blocks[0], Y.blocks[0])
        certified = abs(res.value - oracle.brute_value) <= 1e-9
        y_al = Y.conjugate_by(res.aligner)
        # for tuples the orbit hull is a working set that contains the orbit point u^* X u
        working = None if arity == 1 else [X.conjugate_by(res.aligner.H)]
        pair = build_dual_pair(X, ball, working_set=working, seed=int(seed) + i)
        big = ball.scaled(2.0)
        xs = [X] + [random_in_ball(X.algebra, big, rng) for _ in range(s["grid"] - 1)]
        ys = [y_al] + [random_in_ball(X.algebra, big, rng) for _ in range(s["grid"] - 1)]
        adm = admissibility_check(pair, xs, ys, tol=1e-6)
        gap = duality_gap(X, Y, pair, restarts=20, seed=int(seed))
        ok = adm.passed and certified and -1e-6 <= gap.gap <= 1e-5
        worst_margin = min(worst_margin, adm.min_margin)
        worst_gap = max(worst_gap, gap.gap)
        rows.append(Row(f"commuting{i}_n{n}_k{arity}", "checks", "duality", C=gap.cost, gap=gap.gap,
                        value=adm.min_margin, bound=-1e-6, passed=bool(ok)))
    passed = all(r.passed for r in rows)
    return CriterionResult("duality", "constructed pairs are globally admissible with zero gap at optimal couplings",
                           passed, {"instances": s["duality"], "pairs_per_instance": s["grid"] ** 2,
                                    "min_margin": worst_margin, "max_gap": worst_gap}, rows)


def random_realization(i: int, rng):
    n = 2 + i % 3
    arity = 1 + i % 2
    alg = TracialAlgebra.matrix(n)
    a = random_tuple(alg, arity, rng)
    words, coeffs = [], []
    for _ in range(int(rng.integers(1, 4))):
        length = int(rng.integers(1, 4))
        words.append(tuple((int(rng.integers(arity)), bool(rng.integers(2))) for _ in range(length)))
        coeffs.append(complex(*rng.standard_normal(2)))
    return a, coeffs, words


def criterion_realization(seed=0, scale="full") -> CriterionResult:
    s = SCALES[scale]
    rng = _rng(seed, 50)
    rows = []
    for i in range(s["realize"]):
        a, coeffs, words = random_realization(i, rng)
        z = word_polynomial(a, coeffs, words)
        in_wstar = Subalgebra.from_elements(generated_algebra(a), validate=False).contains(z, tol=1e-8)
        r = 1.0
        t = 0.4 * r / max(op_norm(z), 1e-12)
        rep = definable_realization_demo(a, coeffs, words, t, r)
        ok = in_wstar and rep.error <= 1e-5
        rows.append(Row(f"realize{i}_M{a.algebra.dims[0]}", "checks", "realize", value=rep.error,
                        bound=1e-5, passed=bool(ok)))
    passed = all(r.passed for r in rows)
    return CriterionResult("realization", "gradient of the envelope of Re<x, z> at 0 recovers z",
                           passed, {"instances": s["realize"],
                                    "max_error": _worst(r.value for r in rows)}, rows)


def criterion_interpolation(seed=0, scale="full") -> CriterionResult:
    s = SCALES[scale]
    rng = _rng(seed, 60)
    rows = []
    for i in range(s["interpolate"]):
        n = 2 + i % 5
        X, Y = _commuting_pair(n, 1, rng)
        res = cost_orbit(X.blocks[0], Y.blocks[0], restarts=20, seed=int(seed))
        oracle = assignment_oracle(X.blocks[0], Y.blocks[0])
        certified = abs(res.value - oracle.brute_value) <= 1e-9
        # align exactly by the optimal permutation once the optimizer agrees with it
        u = permutation_unitary(oracle.permutation)
        rep = displacement_interpolation_check(X, Y, Element(X.algebra, [u]), 0.5)
        rows.append(Row(f"sorted{i}_n{n}", "checks", "interpolate.optimal", C=oracle.brute_value,
                        dim_a=rep.dim_midpoint, dim_b=rep.dim_pair, passed=bool(rep.equal and certified)))
    alg = TracialAlgebra.matrix(2)
    X = Tuple(alg, [np.diag([0.0, 1.0]).astype(complex)[None]])
    Y = Tuple(alg, [np.diag([1.0, 0.0]).astype(complex)[None]])
    rep = displacement_interpolation_check(X, Y, alg.identity(), 0.5)
    rows.append(Row("anti_sorted", "checks", "interpolate.counterexample", dim_a=rep.dim_midpoint,
                    dim_b=rep.dim_pair, passed=bool(rep.dim_midpoint < rep.dim_pair)))
    passed = all(r.passed for r in rows)
    return CriterionResult("interpolation", "midpoint and pair generate algebras of equal dimension at "
                           "optimal couplings; the anti-sorted coupling drops", passed,
                           {"instances": s["interpolate"], "counterexample": [rep.dim_midpoint, rep.dim_pair]},
                           rows)


CRITERIA: dict[str, Callable[..., CriterionResult]] = {
    "closure": criterion_closure,
    "transport": criterion_transport,
    "regularization": criterion_regularization,
    "gradient": criterion_gradient,
    "inequalities": criterion_inequalities,
    "duality": criterion_duality,
    "realization": criterion_realization,
    "interpolation": criterion_interpolation,
}


def run_suite(names, seed=0, scale="full") -> list[CriterionResult]:
    return [CRITERIA[name](seed, scale) for name in names]
