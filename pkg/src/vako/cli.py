"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 no solution.
"""
import argparse
import csv
import json
import math
import os
import sys

import jsonschema
import numpy as np

from . import boundary, extremals, flow, hamiltonian, problems, variation
from .errors import DimensionMismatch, NoSolutionFound, NonHorizontal, NumericalError, UnknownProblem
from .geometry import Submanifold
from .hamiltonian import DegenerateHamiltonian
from .polynomial import inline_problem, level_set

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_NO_SOLUTION = 0, 2, 3, 4

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_TERM = {
    "type": "object", "additionalProperties": False, "required": ["c", "e"],
    "properties": {"c": _NUM, "e": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
}
_POLY = {"type": "array", "items": _TERM}
_POLYMAT = {"type": "array", "items": {"type": "array", "items": _POLY}}
_SET = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["point"],
         "properties": {"point": _VEC}},
        {"type": "object", "additionalProperties": False, "required": ["whole"],
         "properties": {"whole": {"type": "object", "maxProperties": 0}}},
        {"type": "object", "additionalProperties": False, "required": ["levelset"],
         "properties": {"levelset": {"type": "array", "items": _POLY, "minItems": 1}}},
    ]
}
_SPAN = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["problem"],
    "properties": {
        "problem": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["builtin"],
                 "properties": {
                     "builtin": {"type": "string"},
                     "params": {"type": "object", "additionalProperties": False,
                                "properties": {"n": {"type": "integer", "minimum": 1}}}}},
                {"type": "object", "additionalProperties": False, "required": ["inline"],
                 "properties": {"inline": {
                     "type": "object", "additionalProperties": False,
                     "required": ["n", "k", "X", "lagrangian"],
                     "properties": {
                         "name": {"type": "string"},
                         "n": {"type": "integer", "minimum": 1},
                         "k": {"type": "integer", "minimum": 1},
                         "X": _POLYMAT, "theta": _POLYMAT, "Xprime": _POLYMAT,
                         "lagrangian": _POLY,
                         "autonomous": {"type": "boolean"}}}}},
            ]
        },
        "bvp": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "preset": {"type": "string"},
                "P": _SET, "Q": _SET, "t_span": _SPAN,
                "steps": {"type": "integer", "minimum": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "anchor": {"type": "object", "additionalProperties": False,
                           "required": ["q0", "p0"], "properties": {"q0": _VEC, "p0": _VEC}},
                "starts": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "ivp": {
            "type": "object", "additionalProperties": False,
            "properties": {"t_span": _SPAN, "steps": {"type": "integer", "minimum": 1},
                           "q0": _VEC, "p0": _VEC},
        },
        "legendre": {
            "type": "object", "additionalProperties": False,
            "properties": {"samples": {"type": "integer", "minimum": 1},
                           "seed": {"type": "integer", "minimum": 0},
                           "fiber_scale": {"type": "number", "exclusiveMinimum": 0}},
        },
    },
}


class InputError(Exception):
    """Invalid problem file or arguments."""


# ---------------------------------------------------------------- output

def _fmt(x):
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, np.ndarray):
        return _fmt(x.tolist())
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in sorted(x.items())) + "}"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj):
    """JSON with sorted keys and floats at 17 significant digits."""
    return _fmt(obj) + "\n"


def _emit(obj, stream=None):
    (stream or sys.stdout).write(dumps(obj))


def write_csv(path, phase_path, n, k):
    header = ["t"] + [f"q_{i + 1}" for i in range(n)] + [f"p_{i + 1}" for i in range(n)] + \
        [f"u_{i + 1}" for i in range(k)] + ["H"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for j in range(len(phase_path)):
            row = [phase_path.times[j], *phase_path.q[j], *phase_path.p[j], *phase_path.u[j],
                   phase_path.H[j]]
            w.writerow([format(float(v), ".17g") for v in row])


def read_csv(path, n, k):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError("trajectory file is empty")
    expected = ["t"] + [f"q_{i + 1}" for i in range(n)] + [f"p_{i + 1}" for i in range(n)] + \
        [f"u_{i + 1}" for i in range(k)] + ["H"]
    if rows[0] != expected:
        raise InputError(f"trajectory header must be {','.join(expected)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise InputError(f"trajectory has a non-numeric entry: {exc}") from exc
    if data.ndim != 2 or data.shape[0] < 5 or data.shape[1] != len(expected):
        raise InputError("trajectory needs at least 5 complete rows")
    t = data[:, 0]
    q = data[:, 1:1 + n]
    p = data[:, 1 + n:1 + 2 * n]
    u = data[:, 1 + 2 * n:1 + 2 * n + k]
    return flow.PhasePath(t, q, p, u, data[:, -1])


# ---------------------------------------------------------------- input

def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"schema error at {where}: {exc.message}") from exc
    return doc


class Context:
    """Problem, Lagrangian and Hamiltonian assembled from a validated document."""

    def __init__(self, doc):
        self.doc = doc
        spec = doc["problem"]
        self.builtin = None
        try:
            if "builtin" in spec:
                self.builtin = problems.builtin(spec["builtin"], **spec.get("params", {}))
                self.problem = self.builtin.problem
                self.lagrangian = self.builtin.lagrangian
            else:
                self.problem, self.lagrangian = inline_problem(spec["inline"])
        except UnknownProblem as exc:
            raise InputError(str(exc)) from exc
        except (ValueError, KeyError) as exc:
            raise InputError(f"invalid inline problem: {exc}") from exc
        self.dh = DegenerateHamiltonian(self.lagrangian)

    @property
    def n(self):
        return self.problem.n

    @property
    def k(self):
        return self.problem.k

    def vector(self, values, what):
        v = np.asarray(values, dtype=float)
        if v.shape != (self.n,):
            raise InputError(f"{what} must have {self.n} entries, got {v.size}")
        return v

    def submanifold(self, block):
        if "point" in block:
            return Submanifold.Point(self.vector(block["point"], "point"))
        if "whole" in block:
            return Submanifold.Whole(self.n)
        try:
            return level_set(block["levelset"], self.n)
        except ValueError as exc:
            raise InputError(f"invalid level set: {exc}") from exc

    def bvp_sets(self):
        """``(P, Q, t0, t1)`` from the bvp block, or None."""
        block = self.doc.get("bvp")
        if block is None:
            return None
        preset = self._preset(block)
        P = self.submanifold(block["P"]) if "P" in block else (preset.P if preset else None)
        Q = self.submanifold(block["Q"]) if "Q" in block else (preset.Q if preset else None)
        if P is None or Q is None:
            raise InputError("bvp block needs P and Q (or a preset)")
        t0, t1 = block.get("t_span", [preset.t0, preset.t1] if preset else [0.0, 1.0])
        return P, Q, float(t0), float(t1)

    def _preset(self, block):
        if "preset" not in block:
            return None
        if self.builtin is None or block["preset"] not in self.builtin.bvps:
            raise InputError(f"unknown bvp preset {block['preset']!r}")
        return self.builtin.bvps[block["preset"]]

    def bvp_spec(self):
        block = self.doc.get("bvp")
        if block is None:
            raise InputError("problem file has no bvp block")
        preset = self._preset(block)
        P, Q, t0, t1 = self.bvp_sets()
        if "anchor" in block:
            q0 = self.vector(block["anchor"]["q0"], "anchor q0")
            p0 = self.vector(block["anchor"]["p0"], "anchor p0")
        elif preset is not None:
            q0, p0 = preset.q0, preset.p0
        else:
            q0 = P.point if P.kind == "point" else np.zeros(self.n)
            p0 = np.zeros(self.n)
        try:
            return boundary.BvpSpec(P, Q, t0, t1, self.dh, int(block.get("steps", 500)), q0, p0)
        except (DimensionMismatch, ValueError) as exc:
            raise InputError(str(exc)) from exc


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"{what} must be a comma-separated list of numbers") from exc


# ---------------------------------------------------------------- commands

def cmd_solve_ivp(ctx, args):
    block = ctx.doc.get("ivp", {})
    q0 = _floats(args.q0, "--q0") if args.q0 is not None else block.get("q0")
    p0 = _floats(args.p0, "--p0") if args.p0 is not None else block.get("p0")
    if q0 is None or p0 is None:
        raise InputError("initial q0 and p0 are required (flags or ivp block)")
    q0, p0 = ctx.vector(q0, "q0"), ctx.vector(p0, "p0")
    t0, t1 = block.get("t_span", [0.0, 1.0])
    steps = args.steps if args.steps is not None else block.get("steps", 1000)
    if steps < 1:
        raise InputError("--steps must be at least 1")
    path = flow.integrate_hamilton(ctx.dh, float(t0), float(t1), q0, p0, int(steps))
    report = flow.flow_report(path, ctx.problem, ctx.lagrangian.autonomous)
    if args.out:
        write_csv(args.out, path, ctx.n, ctx.k)
    _emit({
        "energy_drift": report.energy_drift,
        "horizontality_max": report.horizontality_max,
        "steps": report.steps,
        "q_final": path.q[-1],
        "p_final": path.p[-1],
    })
    return EXIT_OK


def _solution_record(rank, sol):
    return {
        "rank": rank,
        "q0": sol.q0,
        "p0": sol.p0,
        "action": sol.action,
        "residuals": list(sol.residuals),
        "newton_iterations": sol.newton_iterations,
    }


def cmd_solve_bvp(ctx, args):
    spec = ctx.bvp_spec()
    block = ctx.doc["bvp"]
    tol = float(block.get("tolerance", 1e-10))
    starts = args.starts if args.starts is not None else block.get("starts", 1)
    seed = args.seed if args.seed is not None else block.get("seed", 0)
    if starts < 1:
        raise InputError("--starts must be at least 1")
    result = boundary.multi_start_shoot(spec, tol, int(starts), int(seed))
    out = {"solutions": [_solution_record(i, s) for i, s in enumerate(result.solutions)],
           "failed_starts": result.failures}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for i, s in enumerate(result.solutions):
            write_csv(os.path.join(args.out, f"solution_{i:03d}.csv"), s.path, ctx.n, ctx.k)
        with open(os.path.join(args.out, "solutions.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps(out))
    _emit(out)
    return EXIT_OK


def _ends(ctx, curve):
    """Boundary sets from the bvp block when the curve ends on them, else its end points."""
    sets = ctx.bvp_sets() if "bvp" in ctx.doc else None
    if sets is not None:
        P, Q = sets[0], sets[1]
        if P.contains(curve.q[0], 1e-6) and Q.contains(curve.q[-1], 1e-6):
            return P, Q
    return Submanifold.Point(curve.q[0]), Submanifold.Point(curve.q[-1])


def _check_horizontal(problem, curve, tol=variation.PERTURBED_TOL):
    if problem.n == problem.k:
        return
    D, _ = variation.difference_pair(curve.times)
    vel = D @ curve.q
    worst = max(float(np.linalg.norm(problem.theta(t, q) @ v))
                for t, q, v in zip(curve.times, curve.q, vel))
    if worst > tol:
        raise NonHorizontal(f"trajectory leaves the distribution by {worst:.3g}")


def _trajectory(ctx, path):
    try:
        return read_csv(path, ctx.n, ctx.k)
    except OSError as exc:
        raise InputError(f"cannot read trajectory: {exc}") from exc


def cmd_check_critical(ctx, args):
    if not 1e-6 <= args.eps <= 1e-2:
        raise InputError("--eps must lie in [1e-6, 1e-2]")
    path = _trajectory(ctx, args.trajectory)
    try:
        curve = variation.DiscreteCurve(path.times, path.q, path.u)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _check_horizontal(ctx.problem, curve)
    P, Q = _ends(ctx, curve)
    basis = variation.variation_basis(ctx.problem, curve, P, Q)
    fv = variation.first_variation(ctx.lagrangian, curve, basis, args.eps)
    mult = variation.recover_multiplier(ctx.problem, path)
    m = ctx.n - ctx.k
    Lt = variation.extended_lagrangian(ctx.lagrangian, np.eye(m)).with_multiplier(path.times, mult.lam)
    el = variation.el_residual(Lt, variation.DiscreteCurve(path.times, path.q))
    _emit({
        "first_variation_max": fv.max,
        "el_residual_max": el.max,
        "multiplier_smoothness": mult.smoothness,
        "fields": len(basis),
    })
    return EXIT_OK


def cmd_abnormal(ctx, args):
    if args.line_probe:
        curve = extremals.line_probe(ctx.problem)
        P, Q = Submanifold.Point(curve.q[0]), Submanifold.Point(curve.q[-1])
    else:
        path = _trajectory(ctx, args.trajectory)
        try:
            curve = variation.DiscreteCurve(path.times, path.q, path.u)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        P, Q = _ends(ctx, curve)
    verdict = extremals.abnormal_test(ctx.problem, curve, P, Q, args.tol)
    angle = extremals.oracle_agreement(ctx.problem, curve, P, args.tol)
    _emit({
        "verdict": "singular" if verdict.singular else "regular",
        "basis_dimension": verdict.dimension,
        "constraint_residual": verdict.basis.constraint_residuals if verdict.singular else 0.0,
        "oracle_agreement_angle": angle,
    })
    return EXIT_OK


def cmd_legendre_check(ctx, args):
    block = ctx.doc.get("legendre", {})
    samples = args.samples if args.samples is not None else block.get("samples", 50)
    seed = args.seed if args.seed is not None else block.get("seed", 0)
    if samples < 1:
        raise InputError("--samples must be at least 1")
    rep = hamiltonian.invariant_suite(ctx.dh, int(samples), int(seed), block.get("fiber_scale", 1.0))
    _emit({
        "involution_max_dev": rep.involution_max_dev,
        "mutual_inverse_max_dev": rep.mutual_inverse_max_dev,
        "envelope_max_dev": rep.envelope_max_dev,
        "samples": int(samples),
    })
    return EXIT_OK


COMMANDS = {
    "solve-ivp": cmd_solve_ivp,
    "solve-bvp": cmd_solve_bvp,
    "check-critical": cmd_check_critical,
    "abnormal": cmd_abnormal,
    "legendre-check": cmd_legendre_check,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="vako", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-ivp", help="integrate the Hamilton equations")
    p.add_argument("file")
    p.add_argument("--q0", help="comma-separated initial point")
    p.add_argument("--p0", help="comma-separated initial covector")
    p.add_argument("--steps", type=int)
    p.add_argument("--out", help="CSV trajectory path")

    p = sub.add_parser("solve-bvp", help="shoot for boundary-value solutions")
    p.add_argument("file")
    p.add_argument("--starts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for solutions.json and solution_NNN.csv")

    p = sub.add_parser("check-critical", help="discrete criticality checks of a trajectory")
    p.add_argument("file")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--eps", type=float, default=1e-4)

    p = sub.add_parser("abnormal", help="abnormal-extremal test of a trajectory")
    p.add_argument("file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--trajectory")
    g.add_argument("--line-probe", action="store_true",
                   help="use the integral curve of the first frame field from the origin")
    p.add_argument("--tol", type=float, default=extremals.ABNORMAL_TOL)

    p = sub.add_parser("legendre-check", help="Legendre transform invariants")
    p.add_argument("file")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    return parser


def _fail(code, kind, message, **extra):
    sys.stderr.write(f"vako: {message}\n")
    _emit({"error": kind, "message": message, **extra})
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        ctx = Context(load(args.file))
        return COMMANDS[args.command](ctx, args)
    except InputError as exc:
        return _fail(EXIT_INPUT, "input", str(exc))
    except NoSolutionFound as exc:
        return _fail(EXIT_NO_SOLUTION, "no_solution", str(exc), best_residual=exc.best_residual)
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, type(exc).__name__, str(exc), time=exc.time)


if __name__ == "__main__":
    sys.exit(main())
