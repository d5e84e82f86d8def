"""Command line harness: read JSON instances, run one experiment, write JSON and CSV reports.

Exit codes: 0 when every check passes, 2 when a numerical check fails or an
optimizer exhausts its budget, 1 on input errors.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import (
    AlgebraError,
    BallSpec,
    Inclusion,
    TracialAlgebra,
    Tuple,
    matrix_from_json,
    matrix_to_json,
    random_in_ball,
)
from .closure import acl_finite, automorphism_fixed_oracle, dcl_finite
from .convex import (
    choose_t,
    gradient_ball_check,
    gradient_fd_check,
    lasry_lions,
    predicate_from_json,
    sandwich_check,
    semiconcavity_check,
    semiconvexity_check,
)
from .duality import (
    admissibility_check,
    build_dual_pair,
    definable_realization_demo,
    displacement_interpolation_check,
    duality_gap,
)
from .suite import CRITERIA, CSV_COLUMNS, Row, run_suite
from .transport import assignment_oracle, cost_orbit, wasserstein

COMMANDS = ("dcl", "transport", "regularize", "duality", "interpolate", "realize", "checks")
OUT_DIR_ENV = "TRACIAL_LAB_OUT_DIR"

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class InputError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class ExperimentConfig:
    command: str
    instance: str | None = None
    seed: int = 0
    restarts: int = 20
    tol: float = 1e-9
    out_dir: str | None = None
    suite: str = "quick"
    t: float | None = None
    r: float = 1.0
    R: float | None = None
    eps: float | None = None
    samples: int = 30

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError("E_CONFIG", f"unknown command {self.command!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise InputError("E_CONFIG", "seed must be a 64-bit unsigned integer")
        if self.command != "checks" and self.instance is None:
            raise InputError("E_CONFIG", f"{self.command} needs --instance")
        if self.restarts < 1 or self.samples < 1:
            raise InputError("E_CONFIG", "restarts and samples must be positive")

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise InputError("E_CONFIG", f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    def resolved(self) -> dict:
        d = asdict(self)
        d["out_dir"] = str(self.output_dir())
        return d

    def output_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get(OUT_DIR_ENV) or "tracial_lab_out")


# ---------------------------------------------------------------- input parsing

def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError("E_IO", f"instance file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InputError("E_JSON", f"malformed JSON in {path}: {exc}")


def _instances(path: str) -> list[tuple[str, dict]]:
    """A file holds one instance object or {"instances": [...]}, each with an optional id."""
    doc = _load_json(path)
    stem = Path(path).stem
    if isinstance(doc, dict) and "instances" in doc:
        if set(doc) != {"instances"} or not isinstance(doc["instances"], list):
            raise InputError("E_SCHEMA", "batch files contain only an 'instances' list")
        items = doc["instances"]
    else:
        items = [doc]
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise InputError("E_SCHEMA", "each instance must be a JSON object")
        item = dict(item)
        default = stem if len(items) == 1 else f"{stem}#{i}"
        out.append((str(item.pop("id", default)), item))
    return out


def _check_keys(doc: dict, required: set, optional: set = frozenset()):
    missing = required - set(doc)
    unknown = set(doc) - required - set(optional)
    if missing:
        raise InputError("E_SCHEMA", f"missing fields: {sorted(missing)}")
    if unknown:
        raise InputError("E_SCHEMA", f"unknown fields: {sorted(unknown)}")


def parse_tuple(doc, algebra: TracialAlgebra | None = None) -> Tuple:
    """A matrix ([n][n][2]) or a list of matrices, each as [re, im] pairs."""
    arr = np.asarray(doc, dtype=float)
    if arr.ndim == 3:
        mats = [matrix_from_json(doc)]
    elif arr.ndim == 4:
        mats = [matrix_from_json(m) for m in doc]
    else:
        raise InputError("E_SCHEMA", "tuples are a matrix or a list of matrices of [re, im] pairs")
    t = Tuple.from_matrices(np.stack(mats))
    if algebra is not None and t.algebra != algebra:
        raise InputError("E_SCHEMA", "tuple dimension differs from the algebra")
    return t


def _ball(value, arity: int) -> BallSpec:
    if isinstance(value, (int, float)):
        return BallSpec.uniform(float(value), arity)
    radii = tuple(float(v) for v in value)
    if len(radii) != arity:
        raise InputError("E_SCHEMA", f"radius list has length {len(radii)}, arity is {arity}")
    return BallSpec(radii)


def _parse_word(text: str, arity: int):
    word = []
    for tok in text.split():
        starred = tok.endswith("*")
        name = tok[:-1] if starred else tok
        if not name.startswith("a") or not name[1:].isdigit() or int(name[1:]) >= arity:
            raise InputError("E_SCHEMA", f"bad letter {tok!r}; use a0, a1*, ...")
        word.append((int(name[1:]), starred))
    return tuple(word)


# ---------------------------------------------------------------- commands

@dataclass
class Outcome:
    result: dict
    rows: list[Row]
    flags: list[str] = field(default_factory=list)


def run_dcl(cfg, iid, doc) -> Outcome:
    inc = Inclusion.from_json(doc)
    dcl = dcl_finite(inc)
    oracle = automorphism_fixed_oracle(inc, seed=cfg.seed)
    acl = acl_finite(inc)
    agree = (dcl.dim == oracle.dim and dcl.subalgebra.contains_span(oracle, 1e-8)
             and oracle.contains_span(dcl.subalgebra, 1e-8))
    result = {"dcl_dim": dcl.dim, "acl_dim": acl.dim, "oracle_dim": oracle.dim,
              "classes": [list(c) for c in dcl.classes], "agreement": bool(agree)}
    row = Row(iid, "dcl", "dcl_vs_oracle", dim_a=dcl.dim, dim_b=oracle.dim, passed=bool(agree))
    return Outcome(result, [row], [] if agree else ["dcl disagrees with oracle"])


def run_transport(cfg, iid, doc) -> Outcome:
    _check_keys(doc, {"x", "y"})
    X, Y = parse_tuple(doc["x"]), parse_tuple(doc["y"])
    if X.algebra != Y.algebra or X.arity != Y.arity:
        raise InputError("E_SCHEMA", "x and y must have the same shape")
    w = wasserstein(X, Y, restarts=cfg.restarts, seed=cfg.seed, tol=cfg.tol)
    result = {"C": w.cost, "d": w.distance, "raw_d2": w.raw_d2, "converged": w.coupling.converged,
              "aligner": matrix_to_json(w.coupling.aligner.blocks[0])}
    rows = [Row(iid, "transport", "cost", C=w.cost, d=w.distance, passed=w.coupling.converged)]
    flags = [] if w.coupling.converged else ["E_BUDGET: orbit ascent did not converge"]
    try:
        orc = assignment_oracle(X.blocks[0], Y.blocks[0])
    except AlgebraError:
        orc = None
    if orc is not None:
        ref = orc.value if orc.value is not None else orc.brute_value
        if ref is not None:
            err = abs(ref - w.cost)
            ok = err <= 1e-6
            result["oracle_C"] = ref
            rows.append(Row(iid, "transport", "oracle", C=ref, value=err, bound=1e-6, passed=ok))
            if not ok:
                flags.append("optimizer below the assignment oracle")
    return Outcome(result, rows, flags)


def run_regularize(cfg, iid, doc) -> Outcome:
    _check_keys(doc, {"arity", "predicate"}, {"algebra", "n", "r", "R", "t"})
    if ("algebra" in doc) == ("n" in doc):
        raise InputError("E_SCHEMA", "give exactly one of 'algebra' or 'n'")
    alg = TracialAlgebra.from_json(doc["algebra"]) if "algebra" in doc else TracialAlgebra.matrix(int(doc["n"]))
    arity = int(doc["arity"])
    phi = predicate_from_json(doc["predicate"], alg, arity)
    r = _ball(doc.get("r", cfg.r), arity)
    R = _ball(doc.get("R", cfg.R if cfg.R is not None else 1.5 * cfg.r), arity)
    t = doc.get("t", cfg.t)
    if t is None:
        if cfg.eps is not None:
            t = choose_t(phi, r, R, cfg.eps)
        else:
            sx = phi.semiconvexity(R)
            t = min(0.5, 0.25 / sx) if 0 < sx < math.inf else 0.5
    psi = lasry_lions(phi, float(t), r, R, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    c = 1.0 / psi.t
    reps = [
        semiconvexity_check(psi, c, r, cfg.samples, rng, tol=1e-8),
        semiconcavity_check(psi, c, r, cfg.samples, rng, tol=1e-8),
        sandwich_check(phi, psi, r, cfg.samples, rng, tol=0.0),
        gradient_ball_check(psi, r, cfg.samples, rng, tol=1e-6),
        gradient_fd_check(psi, [random_in_ball(alg, r, rng) for _ in range(min(cfg.samples, 10))]),
    ]
    result = {"t": psi.t, "certified": bool(psi.certified), "checks": [rep.to_json() for rep in reps]}
    rows = [Row(iid, "regularize", rep.name, value=rep.max_violation, bound=rep.tol, passed=rep.passed)
            for rep in reps]
    flags = [f"{rep.name} violated" for rep in reps if not rep.passed]
    if not psi.certified:
        flags.append("envelope solve not certified (2 t c >= 1); multistart result")
    return Outcome(result, rows, flags)


def run_duality(cfg, iid, doc) -> Outcome:
    _check_keys(doc, {"x", "y"}, {"r"})
    X, Y = parse_tuple(doc["x"]), parse_tuple(doc["y"])
    ball = _ball(doc.get("r", cfg.r), X.arity)
    pair = build_dual_pair(X, ball, restarts=cfg.restarts, seed=cfg.seed)
    gap = duality_gap(X, Y, pair, restarts=cfg.restarts, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    big = ball.scaled(2.0)
    y_al = Y.conjugate_by(gap.aligner)
    xs = [X] + [random_in_ball(X.algebra, big, rng) for _ in range(cfg.samples - 1)]
    ys = [y_al] + [random_in_ball(X.algebra, big, rng) for _ in range(cfg.samples - 1)]
    adm = admissibility_check(pair, xs, ys)
    gap_ok = -1e-6 <= gap.gap <= 1e-5
    result = {"C": gap.cost, "gap": gap.gap, "phi_x": gap.phi_x, "psi_y": gap.psi_y,
              "exact_hull": pair.exact, "converged": gap.converged,
              "admissibility": {"pairs": adm.pairs, "min_margin": adm.min_margin,
                                "outside_x": adm.outside_x, "outside_y": adm.outside_y,
                                "solver_ok": adm.solver_ok, "passed": adm.passed}}
    rows = [Row(iid, "duality", "gap", C=gap.cost, gap=gap.gap, bound=1e-5, passed=gap_ok),
            Row(iid, "duality", "admissibility", value=adm.min_margin, bound=-1e-6, passed=adm.passed)]
    flags = []
    if not gap_ok:
        flags.append("duality gap outside [-1e-6, 1e-5]")
    if not adm.passed:
        flags.append("admissibility violated")
    if not pair.exact:
        flags.append("orbit hull approximated by a working set; gap is not certified")
    return Outcome(result, rows, flags)


def run_interpolate(cfg, iid, doc) -> Outcome:
    _check_keys(doc, {"x", "y"}, {"t"})
    X, Y = parse_tuple(doc["x"]), parse_tuple(doc["y"])
    res = cost_orbit(X.blocks[0], Y.blocks[0], cfg.restarts, cfg.seed, cfg.tol)
    rep = displacement_interpolation_check(X, Y, res.aligner, float(doc.get("t", 0.5)))
    result = {"C": res.value, "t": rep.t, "dim_midpoint": rep.dim_midpoint, "dim_pair": rep.dim_pair,
              "equal": rep.equal, "converged": res.converged}
    # strict drops are observations to inspect, not failures
    row = Row(iid, "interpolate", "dims", C=res.value, dim_a=rep.dim_midpoint, dim_b=rep.dim_pair,
              passed=True)
    flags = [] if res.converged else ["E_BUDGET: orbit ascent did not converge"]
    if not rep.equal:
        result["note"] = "midpoint generates a smaller algebra than the pair"
    return Outcome(result, [row], flags)


def run_realize(cfg, iid, doc) -> Outcome:
    _check_keys(doc, {"a", "coeffs", "words"}, {"t", "r"})
    a = parse_tuple(doc["a"])
    coeffs = [complex(c[0], c[1]) for c in doc["coeffs"]]
    words = [_parse_word(w, a.arity) for w in doc["words"]]
    if len(coeffs) != len(words):
        raise InputError("E_SCHEMA", "coeffs and words differ in length")
    r = float(doc.get("r", cfg.r))
    t = float(doc.get("t", cfg.t if cfg.t is not None else 0.1))
    rep = definable_realization_demo(a, coeffs, words, t, r)
    ok = rep.error <= 1e-5
    result = {"error": rep.error, "gradient_norm": rep.gradient_norm, "target_norm": rep.target_norm,
              "converged": rep.converged, "on_boundary": rep.on_boundary}
    row = Row(iid, "realize", "recovery", value=rep.error, bound=1e-5, passed=ok)
    return Outcome(result, [row], [] if ok else ["z not recovered within 1e-5"])


RUNNERS = {"dcl": run_dcl, "transport": run_transport, "regularize": run_regularize,
           "duality": run_duality, "interpolate": run_interpolate, "realize": run_realize}


def suite_names(choice: str) -> tuple[list[str], str]:
    if choice in ("all", "quick"):
        return list(CRITERIA), "full" if choice == "all" else "quick"
    names = [s.strip() for s in choice.split(",") if s.strip()]
    bad = [n for n in names if n not in CRITERIA]
    if bad or not names:
        raise InputError("E_CONFIG", f"unknown suite {choice!r}; choose all, quick or from {list(CRITERIA)}")
    return names, "full"


# ---------------------------------------------------------------- driver

def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def run(cfg: ExperimentConfig) -> int:
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    results, rows, flags = [], [], []
    if cfg.command == "checks":
        names, scale = suite_names(cfg.suite)
        for crit in run_suite(names, cfg.seed, scale):
            results.append(crit.to_json())
            rows.extend(crit.rows)
            if not crit.passed:
                flags.append(f"criterion {crit.key} failed")
        stem = f"checks-{cfg.suite.replace(',', '+')}"
    else:
        for iid, doc in _instances(cfg.instance):
            try:
                outcome = RUNNERS[cfg.command](cfg, iid, doc)
            except InputError:
                raise
            except (AlgebraError, ValueError, KeyError, TypeError) as exc:
                raise InputError("E_INVARIANT", f"instance {iid}: {exc}")
            results.append({"id": iid, **outcome.result, "flags": outcome.flags})
            rows.extend(outcome.rows)
            flags.extend(f"{iid}: {f}" for f in outcome.flags)
        stem = f"{cfg.command}-{Path(cfg.instance).stem}"
    failed = [r for r in rows if not r.passed]
    status = "pass" if not flags and not failed else "flagged"
    report = {"tool": "tracial-lab", "version": __version__, "config": cfg.resolved(),
              "status": status, "flags": flags, "results": results}
    with open(out / f"{stem}.json", "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow(["" if getattr(r, c) is None else getattr(r, c) for c in CSV_COLUMNS])
    # wall time lives in a sidecar so the main report stays byte-identical across reruns
    with open(out / f"{stem}.timing.json", "w") as fh:
        json.dump({"wall_time_s": time.perf_counter() - start}, fh)
        fh.write("\n")
    for f in flags:
        print(f"flag: {f}", file=sys.stderr)
    print(f"{status}: {out / (stem + '.json')}")
    return EXIT_OK if status == "pass" else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tracial-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
        sp.add_argument("--instance", help="instance JSON file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--restarts", type=int)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--out-dir", dest="out_dir")
        sp.add_argument("--samples", type=int)
        if name == "checks":
            sp.add_argument("--suite", help="all, quick, or a comma list of criteria")
        if name in ("regularize", "duality", "realize"):
            sp.add_argument("--r", type=float)
        if name in ("regularize", "realize"):
            sp.add_argument("--t", type=float)
        if name == "regularize":
            sp.add_argument("--R", type=float)
            sp.add_argument("--eps", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = {}
        if args.config:
            doc = _load_json(args.config)
            if not isinstance(doc, dict):
                raise InputError("E_CONFIG", "config must be a JSON object")
            if doc.get("command", args.command) != args.command:
                raise InputError("E_CONFIG", "config command differs from the subcommand")
        doc["command"] = args.command
        for k, v in vars(args).items():
            if k not in ("command", "config") and v is not None:
                doc[k] = v
        cfg = ExperimentConfig.from_json(doc)
        return run(cfg)
    except InputError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
