"""Command-line front end: ``solve``, ``check``, ``bench`` and ``compare``."""

from __future__ import annotations

import argparse
import csv
import math
import os
import re
import statistics
import sys
from pathlib import Path

from .model import ModelError, max_violation
from .parser import ParseError, UnsupportedInstance, load_problem, read_solution, write_solution
from .search import FEASIBLE, SolverConfig, solve

EXIT_FEASIBLE = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NA = 20

RUN_COLUMNS = ["instance", "category", "seed", "time_limit", "status", "objective",
               "time_to_best", "iterations"]
AGG_COLUMNS = ["sense", "feasible_count", "best", "mean", "stddev", "cv"]
COLUMNS = RUN_COLUMNS + AGG_COLUMNS
AGGREGATE = "AGGREGATE"
ERROR = "ERROR"

INSTANCE_SUFFIXES = (".qplib", ".json")
INPUT_ERRORS = (OSError, ParseError, UnsupportedInstance, ModelError, UnicodeDecodeError)


def _default_seed() -> int:
    env = os.environ.get("LSIQP_SEED")
    if env is None:
        return 1
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"LSIQP_SEED must be an integer, got {env!r}") from None


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["qplib", "canonical"], default=None,
                   help="instance format (default: by file extension)")
    p.add_argument("--bms-samples", type=int, default=100, metavar="T")
    p.add_argument("--obj-weight-cap", type=int, default=100, metavar="ZETA")
    p.add_argument("--disable-exp", action="store_true")
    p.add_argument("--disable-inc", action="store_true")
    p.add_argument("--disable-free", action="store_true")
    p.add_argument("--max-iterations", type=int, default=None,
                   help="also stop after this many iterations (for reproducible runs)")


def _config(args, seed: int, time_limit: float) -> SolverConfig:
    return SolverConfig(time_limit=time_limit, seed=seed, t=args.bms_samples,
                        zeta=args.obj_weight_cap, disable_exp=args.disable_exp,
                        disable_inc=args.disable_inc, disable_free=args.disable_free,
                        max_iterations=args.max_iterations)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lsiqp", description="Local search for integer quadratic programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("instance")
    p.add_argument("--time-limit", type=float, default=10.0, metavar="S")
    p.add_argument("--seed", type=int, default=None, help="random seed (default: $LSIQP_SEED or 1)")
    p.add_argument("--output", choices=["text", "machine"], default="text")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields from the output")
    _add_solver_flags(p)

    p = sub.add_parser("check", help="verify a machine-format solution against an instance")
    p.add_argument("instance")
    p.add_argument("solution")
    p.add_argument("--format", choices=["qplib", "canonical"], default=None)

    p = sub.add_parser("bench", help="run instances x seeds x time limits and write a CSV")
    p.add_argument("paths", nargs="+", help="instance files or directories")
    p.add_argument("--seeds", default="1", help="e.g. '1-10' or '1,2,5'")
    p.add_argument("--time-limits", default="10", help="comma-separated seconds")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--csv", default=None, help="output path (default: stdout)")
    p.add_argument("--no-timing", action="store_true", help="leave time_to_best empty")
    _add_solver_flags(p)

    p = sub.add_parser("compare", help="count instances where run A beats run B")
    p.add_argument("a")
    p.add_argument("b")
    return ap


# --------------------------------------------------------------------------
# solve / check
# --------------------------------------------------------------------------

def cmd_solve(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        config = _config(args, seed, args.time_limit)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        problem = load_problem(args.instance, args.format)
    except INPUT_ERRORS as e:
        print(f"error: {args.instance}: {e}", file=sys.stderr)
        return EXIT_USAGE
    result = solve(problem, config)
    sys.stdout.write(write_solution(result, args.output, timing=not args.no_timing))
    return EXIT_FEASIBLE if result.status == FEASIBLE else EXIT_NA


def cmd_check(args) -> int:
    try:
        problem = load_problem(args.instance, args.format)
        with open(args.solution, encoding="utf-8") as fh:
            sol = read_solution(fh.read())
    except INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if sol.status != FEASIBLE:
        print(f"FAIL: solution status is {sol.status}, nothing to check")
        return EXIT_CHECK_FAILED
    values = []
    for v in problem.variables:
        if v.name not in sol.values:
            print(f"FAIL: variable {v.name!r} missing from solution")
            return EXIT_CHECK_FAILED
        values.append(sol.values[v.name])
    for name in sol.values.keys() - {v.name for v in problem.variables}:
        print(f"FAIL: unknown variable {name!r} in solution")
        return EXIT_CHECK_FAILED
    for v, x in zip(problem.variables, values):
        if not v.lb <= x <= v.ub:
            print(f"FAIL: variable {v.name!r} = {x} outside bounds [{v.lb}, {v.ub}]")
            return EXIT_CHECK_FAILED

    worst, row = max_violation(problem, values)
    obj = problem.objective.evaluate(values)
    if problem.sense_original == "max":
        obj = -obj
    print(f"max violation: {worst:g}")
    print(f"objective: {obj!r}")
    if worst > 0:
        print(f"FAIL: constraint {problem.constraints[row].name!r} violated by {worst:g}")
        return EXIT_CHECK_FAILED
    if sol.objective is None:
        print("FAIL: objective missing from solution")
        return EXIT_CHECK_FAILED
    if abs(sol.objective - obj) > 1e-6 * max(1.0, abs(obj)):
        print(f"FAIL: objective mismatch (claimed {sol.objective!r}, recomputed {obj!r})")
        return EXIT_CHECK_FAILED
    print("OK")
    return EXIT_FEASIBLE


# --------------------------------------------------------------------------
# bench / compare
# --------------------------------------------------------------------------

def parse_seeds(spec: str) -> list[int]:
    seeds: list[int] = []
    for part in filter(None, (p.strip() for p in spec.split(","))):
        m = re.fullmatch(r"(-?\d+)-(-?\d+)", part)
        if m:
            seeds += range(int(m[1]), int(m[2]) + 1)
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def collect_instances(paths: list[str]) -> list[Path]:
    out: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            out += sorted(f for f in p.iterdir() if f.suffix in INSTANCE_SUFFIXES and f.is_file())
        else:
            out.append(p)
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v + 0.0)
    return str(v)


def _run_task(task) -> list[dict]:
    path, fmt, seeds, limit, opts, timing = task
    try:
        problem = load_problem(path, fmt)
    except INPUT_ERRORS as e:
        return [dict(instance=path.name, category="", seed=s, time_limit=limit, status=ERROR,
                     objective=str(e).replace("\n", " ")) for s in seeds]
    rows = []
    for s in seeds:
        r = solve(problem, SolverConfig(time_limit=limit, seed=s, **opts))
        rows.append(dict(instance=problem.name, category=problem.category, seed=s,
                         time_limit=limit, status=r.status, objective=r.best_obj,
                         time_to_best=round(r.stats.time_to_best, 6) if timing else None, iterations=r.stats.iterations,
                         sense=problem.sense_original))
    rows.append(aggregate(rows))
    return rows


def aggregate(rows: list[dict]) -> dict:
    """Summary row over the seeded runs of one instance and time limit."""
    first = rows[0]
    objs = [r["objective"] for r in rows if r["status"] == FEASIBLE]
    agg = dict(instance=first["instance"], category=first["category"], seed="",
               time_limit=first["time_limit"], status=AGGREGATE, sense=first["sense"],
               feasible_count=len(objs))
    if objs:
        mean = statistics.fmean(objs)
        sd = statistics.pstdev(objs)
        agg.update(best=max(objs) if first["sense"] == "max" else min(objs), mean=mean, stddev=sd)
        if mean != 0:
            agg["cv"] = sd / abs(mean)
        else:
            agg["cv"] = 0.0 if sd == 0 else math.inf
    return agg


def write_csv(rows: list[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in COLUMNS])


def cmd_bench(args) -> int:
    try:
        seeds = parse_seeds(args.seeds)
        limits = [float(x) for x in args.time_limits.split(",") if x.strip()]
        if not limits:
            raise ValueError("no time limits given")
        _config(args, seeds[0], limits[0])
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    instances = collect_instances(args.paths)
    if not instances:
        print("error: no instances found", file=sys.stderr)
        return EXIT_USAGE
    opts = dict(t=args.bms_samples, zeta=args.obj_weight_cap, disable_exp=args.disable_exp,
                disable_inc=args.disable_inc, disable_free=args.disable_free,
                max_iterations=args.max_iterations)
    tasks = [(path, args.format, seeds, limit, opts, not args.no_timing) for path in instances for limit in limits]
    if args.jobs == 1:
        chunks = [_run_task(t) for t in tasks]
    else:
        import multiprocessing
        with multiprocessing.Pool(args.jobs) as pool:
            chunks = pool.map(_run_task, tasks, chunksize=1)
    rows = [r for chunk in chunks for r in chunk]
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    return 0


def read_bench(path: str) -> dict[tuple[str, str], tuple[str, float | None]]:
    """Best objective per (instance, time limit) from a bench CSV.

    Uses the aggregate rows; ``None`` marks an instance with no feasible run.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ParseError(f"{path}: missing columns {sorted(missing)}")
        out = {}
        for r in reader:
            if r["status"] != AGGREGATE:
                continue
            best = float(r["best"]) if r["best"] else None
            out[(r["instance"], r["time_limit"])] = (r["sense"], best)
    return out


def compare(a: dict, b: dict) -> tuple[int, int, int]:
    """``(#better, #loss, #tie)`` of run A against run B over shared instances."""
    better = loss = tie = 0
    for key in sorted(a.keys() & b.keys()):
        sense, oa = a[key]
        _, ob = b[key]
        if oa is None and ob is None:
            tie += 1
        elif ob is None:
            better += 1
        elif oa is None:
            loss += 1
        else:
            d = oa - ob if sense == "max" else ob - oa
            tol = 1e-9 * max(1.0, abs(oa), abs(ob))
            if d > tol:
                better += 1
            elif d < -tol:
                loss += 1
            else:
                tie += 1
    return better, loss, tie


def cmd_compare(args) -> int:
    try:
        a, b = read_bench(args.a), read_bench(args.b)
    except (OSError, ParseError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    better, loss, tie = compare(a, b)
    print(f"instances={len(a.keys() & b.keys())}")
    print(f"#better={better}")
    print(f"#loss={loss}")
    print(f"#tie={tie}")
    return 0


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "bench": cmd_bench, "compare": cmd_compare}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
