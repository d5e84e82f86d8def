"""Real-valued predicates on matrix tuples as expression trees.

Leaves are real or imaginary parts of traces of *-polynomials; inner nodes are
continuous connectives or sup/inf over operator-norm balls. Every node reports
conservative regularity constants on a ball D_R:

* lipschitz(R): Lipschitz constant in the L2 norm,
* semiconvexity(R) / semiconcavity(R): c such that f + (c/2)|x|^2 is convex,
  resp. f - (c/2)|x|^2 is concave, along segments in D_R (inf if unknown),
* modulus(R, d) = lipschitz(R) * d, the modulus of continuity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..algebra import (
    AlgebraError,
    BallSpec,
    Element,
    TracialAlgebra,
    Tuple,
    matrix_from_json,
    matrix_to_json,
    op_norm,
    random_in_ball,
)
from .solvers import maximize_projected

Letter = tuple[int, bool]


class Predicate:
    """Base class; subclasses implement value and, when available, gradient."""

    algebra: TracialAlgebra
    arity: int
    convex: bool = False

    def value(self, x: Tuple) -> float:
        raise NotImplementedError

    def gradient(self, x: Tuple) -> Tuple | None:
        """Gradient for the real inner product Re<., .>; None if unavailable."""
        return None

    def value_and_gradient(self, x: Tuple):
        return self.value(x), self.gradient(x)

    def evaluate(self, x: Tuple):
        """(value, converged) where inner optimizers may fail to converge."""
        return self.value(x), True

    def __call__(self, x: Tuple) -> float:
        return self.value(x)

    def lipschitz(self, ball: BallSpec) -> float:
        return math.inf

    def semiconvexity(self, ball: BallSpec) -> float:
        return math.inf

    def semiconcavity(self, ball: BallSpec) -> float:
        return math.inf

    def curvature(self, ball: BallSpec) -> float:
        return max(self.semiconvexity(ball), self.semiconcavity(ball))

    def modulus(self, ball: BallSpec, delta: float) -> float:
        return self.lipschitz(ball) * delta

    @property
    def smooth(self) -> bool:
        return False

    def _check_input(self, x: Tuple):
        if x.arity != self.arity:
            raise AlgebraError(f"predicate arity {self.arity}, got tuple of arity {x.arity}")

    # connective sugar
    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Constant(self.algebra, self.arity, float(other))
        return Sum([self, other])

    def __neg__(self):
        return Scale(-1.0, self)

    def __mul__(self, c: float):
        return Scale(float(c), self)

    __rmul__ = __mul__


class TracePolynomial(Predicate):
    """Re or Im of tau(sum_m c_m w_m(x, constants)).

    A word is a sequence of letters (index, starred). Index k < arity refers
    to the variable x_k; index arity + l refers to constants[l]. Constants let
    one write predicates with parameters, e.g. Re<z, x> = Re tau(z^* x).
    """

    def __init__(self, algebra: TracialAlgebra, arity: int, terms, part: str = "re",
                 constants: Sequence[Element] = ()):
        if part not in ("re", "im"):
            raise AlgebraError(f"part must be 're' or 'im', got {part!r}")
        self.algebra = algebra
        self.arity = int(arity)
        self.part = part
        self.constants = tuple(constants)
        for c in self.constants:
            if c.algebra != algebra:
                raise AlgebraError("constant lives in a different algebra")
        self.terms = []
        for coef, word in terms:
            word = tuple((int(i), bool(s)) for i, s in word)
            for i, _ in word:
                if not 0 <= i < self.arity + len(self.constants):
                    raise AlgebraError(f"letter index {i} out of range")
            self.terms.append((complex(coef), word))
        # Im(z) = Re(-i z)
        self._re_coefs = [c if part == "re" else -1j * c for c, _ in self.terms]
        self._const_norms = [op_norm(c) for c in self.constants]

    @property
    def smooth(self) -> bool:
        return True

    def _letters(self, x: Tuple, j: int, word):
        mats = []
        for i, starred in word:
            m = x.blocks[j][i] if i < self.arity else self.constants[i - self.arity].blocks[j]
            mats.append(m.conj().T if starred else m)
        return mats

    def value(self, x: Tuple) -> float:
        self._check_input(x)
        alg = self.algebra
        total = 0j
        for j, (w, n) in enumerate(zip(alg.float_weights, alg.dims)):
            for c, (_, word) in zip(self._re_coefs, self.terms):
                if not word:
                    total += c * w
                    continue
                mats = self._letters(x, j, word)
                prod = mats[0]
                for m in mats[1:]:
                    prod = prod @ m
                total += c * w * np.trace(prod) / n
        return float(total.real)

    def gradient(self, x: Tuple) -> Tuple:
        self._check_input(x)
        alg = self.algebra
        grads = []
        for j, n in enumerate(alg.dims):
            g = np.zeros((self.arity, n, n), dtype=complex)
            eye = np.eye(n, dtype=complex)
            for c, (_, word) in zip(self._re_coefs, self.terms):
                if not word:
                    continue
                mats = self._letters(x, j, word)
                L = len(mats)
                left = [eye]
                for m in mats[:-1]:
                    left.append(left[-1] @ m)
                right = [eye] * L
                acc = eye
                for p in range(L - 1, -1, -1):
                    right[p] = acc
                    acc = mats[p] @ acc
                for p, (i, starred) in enumerate(word):
                    if i >= self.arity:
                        continue
                    ba = right[p] @ left[p]
                    if starred:
                        g[i] += c * ba
                    else:
                        g[i] += np.conj(c) * ba.conj().T
            grads.append(g)
        return Tuple(alg, grads, copy=False)

    def value_and_gradient(self, x: Tuple):
        return self.value(x), self.gradient(x)

    def _letter_norms(self, ball: BallSpec, word):
        return [ball.radii[i] if i < self.arity else self._const_norms[i - self.arity] for i, _ in word]

    def lipschitz(self, ball: BallSpec) -> float:
        """Per-variable Holder bounds combined by Cauchy-Schwarz."""
        per_var = np.zeros(self.arity)
        for (coef, word) in self.terms:
            norms = self._letter_norms(ball, word)
            for p, (i, _) in enumerate(word):
                if i < self.arity:
                    per_var[i] += abs(coef) * math.prod(norms[:p] + norms[p + 1:])
        return float(np.linalg.norm(per_var))

    def semiconvexity(self, ball: BallSpec) -> float:
        """Bound on |second directional derivative| over D_R per unit direction."""
        total = 0.0
        for (coef, word) in self.terms:
            norms = self._letter_norms(ball, word)
            pos = [p for p, (i, _) in enumerate(word) if i < self.arity]
            for p in pos:
                for q in pos:
                    if p != q:
                        total += abs(coef) * math.prod(
                            v for l, v in enumerate(norms) if l not in (p, q))
        return total

    semiconcavity = semiconvexity

    def to_json(self) -> dict:
        names = [f"x{i}" for i in range(self.arity)] + [f"c{l}" for l in range(len(self.constants))]
        return {
            "op": "trace_poly",
            "part": self.part,
            "terms": [{"coef": [c.real, c.imag],
                       "word": [names[i] + ("*" if s else "") for i, s in word]}
                      for c, word in self.terms],
            "constants": [[matrix_to_json(b) for b in c.blocks] for c in self.constants],
        }


def linear_functional(w: Tuple) -> TracePolynomial:
    """x -> Re<w, x> = sum_k Re tau(w_k^* x_k)."""
    n = w.arity
    terms = [(1.0, ((n + k, True), (k, False))) for k in range(n)]
    return TracePolynomial(w.algebra, n, terms, "re", constants=w.entries)


def half_norm_squared(algebra: TracialAlgebra, arity: int, c: float = 1.0) -> TracePolynomial:
    """x -> (c/2) |x|^2."""
    terms = [(c / 2, ((k, True), (k, False))) for k in range(arity)]
    return TracePolynomial(algebra, arity, terms, "re")


class Constant(Predicate):
    convex = True

    def __init__(self, algebra: TracialAlgebra, arity: int, c: float):
        self.algebra, self.arity, self.c = algebra, arity, float(c)

    @property
    def smooth(self) -> bool:
        return True

    def value(self, x):
        self._check_input(x)
        return self.c

    def gradient(self, x):
        return Tuple.zeros(self.algebra, self.arity)

    def lipschitz(self, ball):
        return 0.0

    def semiconvexity(self, ball):
        return 0.0

    semiconcavity = semiconvexity

    def to_json(self):
        return {"op": "const", "value": self.c}


class Sum(Predicate):
    def __init__(self, children: Sequence[Predicate]):
        children = list(children)
        _same_domain(children)
        self.children = children
        self.algebra, self.arity = children[0].algebra, children[0].arity
        self.convex = all(c.convex for c in children)

    @property
    def smooth(self):
        return all(c.smooth for c in self.children)

    def value(self, x):
        return float(sum(c.value(x) for c in self.children))

    def evaluate(self, x):
        vals = [c.evaluate(x) for c in self.children]
        return float(sum(v for v, _ in vals)), all(ok for _, ok in vals)

    def gradient(self, x):
        gs = [c.gradient(x) for c in self.children]
        if any(g is None for g in gs):
            return None
        out = gs[0]
        for g in gs[1:]:
            out = out + g
        return out

    def lipschitz(self, ball):
        return sum(c.lipschitz(ball) for c in self.children)

    def semiconvexity(self, ball):
        return sum(c.semiconvexity(ball) for c in self.children)

    def semiconcavity(self, ball):
        return sum(c.semiconcavity(ball) for c in self.children)

    def to_json(self):
        return {"op": "add", "args": [c.to_json() for c in self.children]}


class Scale(Predicate):
    def __init__(self, c: float, child: Predicate):
        self.c, self.child = float(c), child
        self.algebra, self.arity = child.algebra, child.arity
        self.convex = (self.c >= 0 and child.convex) or self.c == 0

    @property
    def smooth(self):
        return self.child.smooth

    def value(self, x):
        return self.c * self.child.value(x)

    def evaluate(self, x):
        v, ok = self.child.evaluate(x)
        return self.c * v, ok

    def gradient(self, x):
        g = self.child.gradient(x)
        return None if g is None else g * self.c

    def lipschitz(self, ball):
        return abs(self.c) * self.child.lipschitz(ball)

    def semiconvexity(self, ball):
        if self.c == 0:
            return 0.0
        src = self.child.semiconvexity if self.c > 0 else self.child.semiconcavity
        return abs(self.c) * src(ball)

    def semiconcavity(self, ball):
        if self.c == 0:
            return 0.0
        src = self.child.semiconcavity if self.c > 0 else self.child.semiconvexity
        return abs(self.c) * src(ball)

    def to_json(self):
        return {"op": "scale", "c": self.c, "arg": self.child.to_json()}


class Max(Predicate):
    """Pointwise max; a max of c-semiconvex functions is c-semiconvex."""

    def __init__(self, children: Sequence[Predicate]):
        children = list(children)
        _same_domain(children)
        self.children = children
        self.algebra, self.arity = children[0].algebra, children[0].arity
        self.convex = all(c.convex for c in children)

    def value(self, x):
        return max(c.value(x) for c in self.children)

    def gradient(self, x):
        vals = [c.value(x) for c in self.children]
        return self.children[int(np.argmax(vals))].gradient(x)

    def lipschitz(self, ball):
        return max(c.lipschitz(ball) for c in self.children)

    def semiconvexity(self, ball):
        return max(c.semiconvexity(ball) for c in self.children)

    def to_json(self):
        return {"op": "max", "args": [c.to_json() for c in self.children]}


class Min(Predicate):
    def __init__(self, children: Sequence[Predicate]):
        children = list(children)
        _same_domain(children)
        self.children = children
        self.algebra, self.arity = children[0].algebra, children[0].arity

    def value(self, x):
        return min(c.value(x) for c in self.children)

    def gradient(self, x):
        vals = [c.value(x) for c in self.children]
        return self.children[int(np.argmin(vals))].gradient(x)

    def lipschitz(self, ball):
        return max(c.lipschitz(ball) for c in self.children)

    def semiconcavity(self, ball):
        return max(c.semiconcavity(ball) for c in self.children)

    def to_json(self):
        return {"op": "min", "args": [c.to_json() for c in self.children]}


class Abs(Predicate):
    def __init__(self, child: Predicate):
        self.child = child
        self.algebra, self.arity = child.algebra, child.arity
        self.convex = False

    def value(self, x):
        return abs(self.child.value(x))

    def gradient(self, x):
        g = self.child.gradient(x)
        if g is None:
            return None
        return g * float(np.sign(self.child.value(x)))

    def lipschitz(self, ball):
        return self.child.lipschitz(ball)

    def to_json(self):
        return {"op": "abs", "arg": self.child.to_json()}


class Quantifier(Predicate):
    """sup or inf over y in D_radii of child(x, y); child has arity n + m.

    Evaluated by projected gradient with multi-starts (start 0 is y = 0). The
    result of a sup is a certified lower bound, of an inf an upper bound.
    """

    def __init__(self, kind: str, child: Predicate, bound_ball: BallSpec, starts: int = 8,
                 budget: int = 2000, tol: float = 1e-9, seed: int = 0):
        if kind not in ("sup", "inf"):
            raise AlgebraError(f"quantifier kind must be 'sup' or 'inf', got {kind!r}")
        if child.arity <= bound_ball.arity:
            raise AlgebraError("quantifier must leave at least one free variable")
        self.kind, self.child, self.bound_ball = kind, child, bound_ball
        self.algebra = child.algebra
        self.arity = child.arity - bound_ball.arity
        self.starts, self.budget, self.tol, self.seed = starts, budget, tol, seed
        self.convex = kind == "sup" and child.convex

    def _solve(self, x: Tuple):
        self._check_input(x)
        sign = 1.0 if self.kind == "sup" else -1.0
        n = self.arity
        m = self.bound_ball.arity

        def fg(y):
            xy = x.concat(y)
            v, g = self.child.value_and_gradient(xy)
            return sign * v, (None if g is None else g.select(range(n, n + m)) * sign)

        rng = np.random.default_rng(self.seed)
        starts = [Tuple.zeros(self.algebra, m)]
        starts += [random_in_ball(self.algebra, self.bound_ball, rng) for _ in range(self.starts - 1)]
        best = None
        for y0 in starts:
            res = maximize_projected(fg, y0, self.bound_ball, tol=self.tol, max_iter=self.budget)
            if best is None or res.value > best.value:
                best = res
        return sign * best.value, best.x, best.converged

    def value(self, x):
        return self._solve(x)[0]

    def evaluate(self, x):
        v, _, ok = self._solve(x)
        return v, ok

    def gradient(self, x):
        _, y, _ = self._solve(x)
        g = self.child.gradient(x.concat(y))
        return None if g is None else g.select(range(self.arity))

    def _joint(self, ball: BallSpec) -> BallSpec:
        return BallSpec(ball.radii + self.bound_ball.radii)

    def lipschitz(self, ball):
        return self.child.lipschitz(self._joint(ball))

    def semiconvexity(self, ball):
        return self.child.semiconvexity(self._joint(ball)) if self.kind == "sup" else math.inf

    def semiconcavity(self, ball):
        return self.child.semiconcavity(self._joint(ball)) if self.kind == "inf" else math.inf

    def to_json(self):
        return {"op": self.kind, "radii": list(self.bound_ball.radii), "arg": self.child.to_json()}


class FunctionPredicate(Predicate):
    """Predicate from plain callables, with declared regularity constants."""

    def __init__(self, algebra, arity, fun, grad=None, lipschitz=math.inf,
                 semiconvexity=math.inf, semiconcavity=math.inf, convex=False):
        self.algebra, self.arity = algebra, arity
        self._fun, self._grad = fun, grad
        self._lip, self._sx, self._sv = lipschitz, semiconvexity, semiconcavity
        self.convex = convex

    @property
    def smooth(self):
        return self._grad is not None

    def value(self, x):
        return float(self._fun(x))

    def gradient(self, x):
        return None if self._grad is None else self._grad(x)

    def lipschitz(self, ball):
        return self._lip(ball) if callable(self._lip) else self._lip

    def semiconvexity(self, ball):
        return self._sx(ball) if callable(self._sx) else self._sx

    def semiconcavity(self, ball):
        return self._sv(ball) if callable(self._sv) else self._sv


def max_affine(pieces: Sequence[tuple[Tuple, float]]) -> Max:
    """x -> max_a (Re<x, a> - c_a)."""
    children = []
    for a, c in pieces:
        lin = linear_functional(a)
        children.append(Sum([lin, Constant(a.algebra, a.arity, -float(c))]))
    return Max(children)


def _same_domain(children):
    if not children:
        raise AlgebraError("connective needs at least one argument")
    a0, n0 = children[0].algebra, children[0].arity
    for c in children[1:]:
        if c.algebra != a0 or c.arity != n0:
            raise AlgebraError("connective arguments live on different tuple spaces")


# ---------------------------------------------------------------- JSON grammar

CONNECTIVES = ("trace_poly", "const", "add", "scale", "neg", "max", "min", "abs", "sup", "inf")
_KEYS = {
    "trace_poly": {"op", "part", "terms", "constants"},
    "const": {"op", "value"},
    "add": {"op", "args"},
    "scale": {"op", "c", "arg"},
    "neg": {"op", "arg"},
    "max": {"op", "args"},
    "min": {"op", "args"},
    "abs": {"op", "arg"},
    "sup": {"op", "radii", "arg"},
    "inf": {"op", "radii", "arg"},
}


def _parse_letter(tok: str, arity: int) -> Letter:
    starred = tok.endswith("*")
    core = tok[:-1] if starred else tok
    if len(core) < 2 or core[0] not in "xc" or not core[1:].isdigit():
        raise AlgebraError(f"bad letter {tok!r}; use x<k>, c<l>, optionally with '*'")
    idx = int(core[1:])
    if core[0] == "x":
        if idx >= arity:
            raise AlgebraError(f"variable {tok!r} exceeds arity {arity}")
        return idx, starred
    return arity + idx, starred


def predicate_from_json(doc: dict, algebra: TracialAlgebra, arity: int) -> Predicate:
    """Build a predicate from the JSON expression grammar; unknown keys are rejected."""
    if not isinstance(doc, dict) or "op" not in doc:
        raise AlgebraError(f"predicate node must be an object with 'op', got {doc!r}")
    op = doc["op"]
    if op not in _KEYS:
        raise AlgebraError(f"unknown connective {op!r}; allowed: {CONNECTIVES}")
    allowed = _KEYS[op]
    extra = set(doc) - allowed
    if extra:
        raise AlgebraError(f"unknown fields {sorted(extra)} in {op!r} node")
    if op == "trace_poly":
        consts = []
        for c in doc.get("constants", []):
            consts.append(Element(algebra, [matrix_from_json(b) for b in c]))
        terms = []
        for t in doc["terms"]:
            if set(t) - {"coef", "word"}:
                raise AlgebraError(f"unknown fields in term {t!r}")
            coef = t["coef"]
            coef = complex(coef[0], coef[1]) if isinstance(coef, list) else complex(coef)
            word = [_parse_letter(tok, arity) for tok in t["word"]]
            for i, _ in word:
                if i >= arity + len(consts):
                    raise AlgebraError(f"constant index out of range in {t['word']!r}")
            terms.append((coef, word))
        return TracePolynomial(algebra, arity, terms, doc.get("part", "re"), consts)
    if op == "const":
        return Constant(algebra, arity, float(doc["value"]))
    if op == "add":
        return Sum([predicate_from_json(a, algebra, arity) for a in doc["args"]])
    if op == "scale":
        return Scale(float(doc["c"]), predicate_from_json(doc["arg"], algebra, arity))
    if op == "neg":
        return Scale(-1.0, predicate_from_json(doc["arg"], algebra, arity))
    if op == "max":
        return Max([predicate_from_json(a, algebra, arity) for a in doc["args"]])
    if op == "min":
        return Min([predicate_from_json(a, algebra, arity) for a in doc["args"]])
    if op == "abs":
        return Abs(predicate_from_json(doc["arg"], algebra, arity))
    ball = BallSpec(tuple(doc["radii"]))
    child = predicate_from_json(doc["arg"], algebra, arity + ball.arity)
    return Quantifier(op, child, ball)
