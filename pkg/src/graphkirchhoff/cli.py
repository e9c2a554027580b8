"""Command-line front end.

Exit codes: 0 success, 1 input/usage/I-O error, 2 validation error,
3 convergence or projection failure, 4 property failure (a failed property
check, or m < 2c in a ``solve --mode both`` run).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .energy import ModelParams, Problem, nodal_ratio
from .graph_core import GraphDomain, IngestError, ValidationError, load_graph, validate
from .nehari import ProjectionError, pair_project, scalar_project
from .solver import ConvergenceError, SolveConfig, solve
from .verify import run_suite

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_PROPERTY = 0, 1, 2, 3, 4



def _error(message: str, *args):
    print("error: " + (message % args if args else message), file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {val}")
    return val


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (val > 0 and math.isfinite(val)):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text}")
    return val


def _finite_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not math.isfinite(val):
        raise argparse.ArgumentTypeError(f"must be finite, got {text}")
    return val


def _range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two numbers A:B, got {text!r}")
    if not (0 < lo < hi and math.isfinite(hi)):
        raise argparse.ArgumentTypeError(f"need 0 < A < B, got {text!r}")
    return lo, hi


def _read_json(path: str, what: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IngestError(f"cannot read {what} file {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"{what} file {path} is not valid JSON: {exc}") from exc


def _jsonable(obj):
    """Replace non-finite floats (not representable in JSON) by strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        return val if math.isfinite(val) else str(val)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(doc, out: str | None):
    text = json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise IngestError(f"cannot write {out}: {exc.strerror}") from exc


def _load_problem(graph_path: str, params_path: str) -> Problem:
    gd = GraphDomain.from_json(_read_json(graph_path, "graph"))
    return Problem(gd, ModelParams.from_json(_read_json(params_path, "params")))


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    problem = _load_problem(args.graph, args.params)
    cfg = SolveConfig(seeds=args.seeds, grad_tol=args.tol)
    report = solve(problem, cfg, mode=args.mode)
    doc = report.to_json()
    doc["config"] = asdict(cfg)
    doc["mode"] = args.mode
    _emit(doc, args.out)
    if args.mode == "both" and not report.doubling_ok:
        _error("m = %.12g < 2c = %.12g", report.m_level, 2 * report.c_level)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_suite(args.trials, args.seed)
    _emit(report.to_json(), args.out)
    for check in report.checks:
        if check.failures:
            _error("%s: %d of %d trials failed (worst relative violation %.3e)",
                      check.name, check.failures, check.trials, check.worst_violation)
    return EXIT_OK if report.passed else EXIT_PROPERTY


def cmd_project(args) -> int:
    problem = _load_problem(args.graph, args.params)
    data = _read_json(args.input, "input")
    if not isinstance(data, dict):
        raise IngestError("input file must be a JSON object mapping vertex ids to values")
    try:
        values = {str(k): float(v) for k, v in data.items()}
    except (TypeError, ValueError) as exc:
        raise IngestError(f"input values must be numbers: {exc}") from exc
    gd = problem.gd
    u = gd.function(values)
    if args.kind == "scalar":
        proj = scalar_project(problem, u)
        projected = proj.t0 * u
    else:
        proj = pair_project(problem, u)
        projected = proj.s0 * np.maximum(u, 0.0) + proj.t0 * np.minimum(u, 0.0)
    doc = {"kind": args.kind, **asdict(proj), "projected": gd.as_mapping(projected)}
    _emit(doc, None)
    return EXIT_OK


def sample_nonlinearity(p: float, r: float, s_min: float, s_max: float, points: int):
    """Log-spaced samples of the nodal ratio and the first decreasing pair, if any."""
    s = np.geomspace(s_min, s_max, points)
    ratio = np.array([nodal_ratio(float(x), p, r) for x in s])
    drops = np.flatnonzero(np.diff(ratio) < 0)
    first = None if drops.size == 0 else (float(s[drops[0]]), float(s[drops[0] + 1]))
    return s, ratio, first


def cmd_sample_nonlinearity(args) -> int:
    s_min, s_max = args.range
    s, ratio, first = sample_nonlinearity(args.p, args.r, s_min, s_max, args.points)
    try:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["s", "ratio"])
            for x, y in zip(s, ratio):
                writer.writerow([repr(float(x)), repr(float(y))])
    except OSError as exc:
        raise IngestError(f"cannot write {args.out}: {exc.strerror}") from exc
    if first is None:
        print(f"non_monotone=false p={args.p:g} r={args.r:g}")
    else:
        print(f"non_monotone=true p={args.p:g} r={args.r:g} ratio({first[0]:.6g}) > ratio({first[1]:.6g})")
    return EXIT_OK


def cmd_validate(args) -> int:
    graph, dom = load_graph(_read_json(args.graph, "graph"))
    problems = validate(graph, dom)
    _emit({"valid": not problems, "violations": problems}, None)
    return EXIT_OK if not problems else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphkirchhoff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="ground and sign-changing ground-state levels")
    p.add_argument("--graph", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--mode", choices=("ground", "nodal", "both"), default="both")
    p.add_argument("--seeds", type=_positive_int, default=16)
    p.add_argument("--tol", type=_positive_float, default=1e-8, help="max pointwise residual")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="randomized property suite")
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("project", help="project a function onto the Nehari or nodal Nehari set")
    p.add_argument("--graph", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--input", required=True, help="JSON object of vertex -> value")
    p.add_argument("--kind", choices=("scalar", "pair"), default="scalar")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("sample-nonlinearity", help="CSV samples of the nodal ratio on s > 0")
    p.add_argument("--p", type=_finite_float, required=True)
    p.add_argument("--r", type=_finite_float, required=True)
    p.add_argument("--range", type=_range, default=(0.01, 5.0), metavar="A:B")
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample_nonlinearity)

    p = sub.add_parser("validate", help="check a graph/domain file")
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "sample-nonlinearity" and args.points < 2:
            parser.error("--points must be >= 2")
    except SystemExit as exc:  # usage errors exit 1, --help exits 0
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        return args.func(args)
    except IngestError as exc:
        _error(str(exc))
        return EXIT_INPUT
    except ValidationError as exc:
        _error(str(exc))
        return EXIT_VALIDATION
    except (ConvergenceError, ProjectionError) as exc:
        _error(str(exc))
        return EXIT_CONVERGENCE
    except ValueError as exc:
        _error(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
