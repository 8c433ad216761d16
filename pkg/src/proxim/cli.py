"""Command-line front end.

Exit codes::

    0   success (Converged, HoldsOnSamples, NoViolationFound, SemiSharpOnSamples)
    1   verify/props found a witness; gallery run-all had a miss
    2   solve stopped at max_iter
    3   solve diverged
    64  usage, schema or configuration error
    65  the map is not cyclic on the given sets
    66  instance name or file not found
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from . import __version__, gallery, maps, properties, solver
from . import geometry as geo
from .errors import ConfigError, CyclicityError, DimensionError, DomainError, NotFound, SchemaError
from .instance import Instance, dump_instance, dumps, load_instance, validate_report, write_atomic
from .sampling import SAMPLERS

EXIT_OK = 0
EXIT_WITNESS = 1
EXIT_MAX_ITER = 2
EXIT_DIVERGED = 3
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_NOT_FOUND = 66

SOLVE_EXIT = {
    solver.StopReason.CONVERGED: EXIT_OK,
    solver.StopReason.MAX_ITERATIONS: EXIT_MAX_ITER,
    solver.StopReason.DIVERGED: EXIT_DIVERGED,
}
SEED_ENV = "PROXIM_SEED"
FALLBACK_SEED = 42


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, but leave help strings that describe their own fallback alone."""

    def _get_help_string(self, action):
        if action.default is None or "%(default)" in (action.help or ""):
            return action.help
        return super()._get_help_string(action)


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return FALLBACK_SEED
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be a nonnegative integer, got {raw!r}") from None
    if seed < 0:
        raise ConfigError(f"{SEED_ENV} must be a nonnegative integer, got {raw!r}")
    return seed


def resolve(target: str, grid: int) -> Instance:
    """Gallery names take precedence over file paths."""
    try:
        return gallery.load(target, grid).instance
    except NotFound:
        pass
    path = Path(target)
    if path.is_file():
        return load_instance(path)
    raise NotFound(f"{target!r} is neither a gallery instance nor a readable file")


def _floats(text: str):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


# ---------------------------------------------------------------------------
# reports


def _report(operation, inst: Instance, seed, verdict, code, results, started) -> dict:
    return {
        "tool": "proxim",
        "tool_version": __version__,
        "operation": operation,
        "instance": inst.to_json(),
        "seed": seed,
        "verdict": verdict,
        "exit_code": code,
        "results": results,
        "wall_time_s": time.perf_counter() - started,
    }


def _emit(report: dict, out, stdout):
    validate_report(report)
    text = dumps(report)
    if out:
        write_atomic(out, text)
    stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args, stdout) -> int:
    started = time.perf_counter()
    inst = resolve(args.instance, args.grid)
    T = inst.require_map()
    cfg = inst.solver
    tol = args.tol if args.tol is not None else cfg.get("tol", solver.DEFAULT_TOL)
    max_iter = args.max_iter if args.max_iter is not None else cfg.get("max_iter", solver.DEFAULT_MAX_ITER)
    if args.u0 is not None:
        coords = args.u0
    elif "u0" in cfg:
        coords = cfg["u0"]
    else:
        coords = inst.G.from_params(inst.G.vertex_params()[:1])[0]
    u0 = geo.Point(tuple(float(c) for c in coords), inst.norm)
    inst.G.check_point(u0)
    if args.fixed_point:
        r = solver.solve_fixed_point(T, u0, tol, max_iter)
    else:
        r = solver.solve_best_approximation(T, u0, tol, max_iter)
    code = SOLVE_EXIT[r.stop_reason]
    results = r.to_json()
    results["u0"] = list(u0.coords)
    results["set_distance"] = geo.set_distance(inst.G, inst.H).value
    results["identities"] = solver.verify_solution_identities(r, T, seed=args.seed).to_json() if r.converged else None
    if args.trace_csv:
        solver.write_trace_csv(r.trace, args.trace_csv)
    op = "fixed-point" if args.fixed_point else "solve"
    _emit(_report(op, inst, args.seed, r.stop_reason.value, code, results, started), args.out, stdout)
    return code


def cmd_verify(args, stdout) -> int:
    started = time.perf_counter()
    inst = resolve(args.instance, args.grid)
    T = inst.require_map()
    rep = maps.verify_class(T, args.cls, inst.gauge, args.samples, args.seed, beta=args.beta,
                            sampler=args.sampler, probes=inst.probes)
    code = EXIT_OK if rep.verdict == maps.HOLDS else EXIT_WITNESS
    results = rep.to_json()
    results["sampler"] = args.sampler
    _emit(_report("verify", inst, args.seed, rep.verdict, code, results, started), args.out, stdout)
    return code


def cmd_props(args, stdout) -> int:
    started = time.perf_counter()
    inst = resolve(args.instance, args.grid)
    cfg = inst.falsifier
    if args.property == "semi-sharp":
        rep = properties.check_semi_sharp_proximal(inst.G, inst.H, args.resolution, seed=args.seed)
        code = EXIT_OK if rep.verdict == properties.SEMI_SHARP else EXIT_WITNESS
    else:
        delta = args.delta if args.delta is not None else cfg.get("delta", properties.DEFAULT_DELTA)
        epsilon = args.epsilon if args.epsilon is not None else cfg.get("epsilon", properties.DEFAULT_EPSILON)
        budget = args.budget if args.budget is not None else cfg.get("budget", 10000)
        fn = properties.falsify_uc if args.property == "uc" else properties.falsify_strongly_uc
        rep = fn(inst.G, inst.H, delta, epsilon, budget, args.seed)
        code = EXIT_OK if rep.verdict == properties.NO_VIOLATION else EXIT_WITNESS
    _emit(_report("props", inst, args.seed, rep.verdict, code, rep.to_json(), started), args.out, stdout)
    return code


def cmd_gallery(args, stdout) -> int:
    if args.action == "list":
        for name in gallery.names():
            stdout.write(name + "\n")
        return EXIT_OK
    if args.action == "export":
        if not args.name:
            raise ConfigError("gallery export needs an instance name")
        text = dump_instance(gallery.load(args.name, args.grid).instance)
        if args.out:
            write_atomic(args.out, text)
        stdout.write(text)
        return EXIT_OK
    started = time.perf_counter()
    suite = gallery.run_all(grid=args.grid, samples=args.samples, seed=args.seed)
    code = EXIT_OK if suite.passed else EXIT_WITNESS
    report = {
        "tool": "proxim",
        "tool_version": __version__,
        "operation": "gallery-run-all",
        "instance": {"names": gallery.names(), "grid": args.grid},
        "seed": args.seed,
        "verdict": "AllPassed" if suite.passed else "Misses",
        "exit_code": code,
        "results": suite.to_json(),
        "wall_time_s": time.perf_counter() - started,
    }
    _emit(report, args.out, stdout)
    return code


# ---------------------------------------------------------------------------
# parser


def build_parser(seed: int) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxim",
        description="Best approximations of cyclic maps, contraction-class checks and UC-property falsification.",
        formatter_class=_Formatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_seed=True):
        p.add_argument("instance", help="gallery name or path to a JSON instance file (names win)")
        p.add_argument("--grid", type=_positive_int, default=gallery.DEFAULT_GRID,
                       help="grid size for gallery function-space instances")
        p.add_argument("--out", default=None, help="also write the JSON report here (default: stdout only)")
        if with_seed:
            p.add_argument("--seed", type=int, default=seed, help=f"sampling seed (env {SEED_ENV})")

    p = sub.add_parser("solve", help="Picard iteration to a best approximation or fixed point",
                       formatter_class=_Formatter)
    common(p)
    p.add_argument("--tol", type=_positive_float, default=None,
                   help=f"stopping tolerance (default: instance setting, else {solver.DEFAULT_TOL})")
    p.add_argument("--max-iter", type=_positive_int, default=None,
                   help=f"iteration cap (default: instance setting, else {solver.DEFAULT_MAX_ITER})")
    p.add_argument("--u0", type=_floats, default=None,
                   help="start point, comma-separated (default: instance setting, else the first vertex of G)")
    p.add_argument("--trace-csv", default=None, help="write the iteration trace as CSV (default: no trace)")
    p.add_argument("--fixed-point", action="store_true", help="solve for a fixed point in G and H")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="check a contraction-class inequality on samples",
                       formatter_class=_Formatter)
    common(p)
    p.add_argument("--class", dest="cls", default=maps.ContractionClass.ALMOST_CYCLIC_PSI.value,
                   choices=[c.value for c in maps.ContractionClass], help="contraction class")
    p.add_argument("--beta", type=float, default=None,
                   help="beta in [0, 1) for cyclic-contraction and almost-cyclic (default: none; required there)")
    p.add_argument("--samples", type=_positive_int, default=10000, help="number of sampled pairs")
    p.add_argument("--sampler", choices=SAMPLERS, default="halton", help="sampling scheme")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("props", help="search for UC / strongly-UC violations or check semi-sharp proximality",
                       formatter_class=_Formatter)
    common(p)
    p.add_argument("--property", choices=["uc", "strongly-uc", "semi-sharp"], default="strongly-uc",
                   help="property to test")
    p.add_argument("--delta", type=_positive_float, default=None,
                   help=f"defect threshold (default: instance setting, else {properties.DEFAULT_DELTA})")
    p.add_argument("--epsilon", type=_positive_float, default=None,
                   help=f"separation threshold (default: instance setting, else {properties.DEFAULT_EPSILON})")
    p.add_argument("--budget", type=_positive_int, default=None,
                   help="number of start triples (default: instance setting, else 10000)")
    p.add_argument("--resolution", type=_positive_float, default=1e-3,
                   help="semi-sharp: partners closer than this count as one")
    p.set_defaults(func=cmd_props)

    p = sub.add_parser("gallery", help="list, export or self-check the built-in instances",
                       formatter_class=_Formatter)
    p.add_argument("action", choices=["list", "export", "run-all"], help="what to do")
    p.add_argument("name", nargs="?", default=None, help="instance name for export (default: none)")
    p.add_argument("--grid", type=_positive_int, default=gallery.DEFAULT_GRID,
                   help="grid size for function-space instances")
    p.add_argument("--samples", type=_positive_int, default=10000, help="run-all: samples per class check")
    p.add_argument("--seed", type=int, default=seed, help=f"run-all: sampling seed (env {SEED_ENV})")
    p.add_argument("--out", default=None, help="also write the output here (default: stdout only)")
    p.set_defaults(func=cmd_gallery)
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        seed = default_seed()
    except ConfigError as exc:
        stderr.write(f"proxim: error: {exc}\n")
        return EXIT_USAGE
    parser = build_parser(seed)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; remap to 64
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args, stdout)
    except SchemaError as exc:
        stderr.write(f"proxim: schema error: {exc}\n")
        return EXIT_USAGE
    except (ConfigError, DomainError, DimensionError, ValueError) as exc:
        stderr.write(f"proxim: error: {exc}\n")
        return EXIT_USAGE
    except CyclicityError as exc:
        stderr.write(f"proxim: error: {exc}\n")
        return EXIT_DATA
    except NotFound as exc:
        stderr.write(f"proxim: not found: {exc.args[0]}\n")
        return EXIT_NOT_FOUND
    except FileNotFoundError as exc:
        stderr.write(f"proxim: not found: {exc}\n")
        return EXIT_NOT_FOUND
