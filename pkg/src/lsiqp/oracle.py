"""Brute-force reference solver and random instance generator.

The enumerator evaluates whole grids with numpy and shares no code with the
incremental evaluator, so the two can check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import EQ, LE, Constraint, Problem, QuadExpr, Variable

OPTIMAL = "OPTIMAL"
INFEASIBLE = "INFEASIBLE"
TOO_LARGE = "TOO_LARGE"

CATEGORIES = ("QUBO", "LCQP", "QCLP", "QCQP")


class UnboundedDomain(ValueError):
    pass


@dataclass
class OracleResult:
    status: str
    opt_obj: float | None = None
    opt_assignment: tuple[int, ...] | None = None
    enumerated_count: int = 0


def _grid_values(expr: QuadExpr, X: np.ndarray) -> np.ndarray:
    out = np.full(X.shape[0], expr.constant, dtype=np.float64)
    for j, c in expr.linear.items():
        out += c * X[:, j]
    for (i, j), c in expr.quadratic.items():
        out += c * X[:, i] * X[:, j]
    return out


def grid_feasible(problem: Problem, X: np.ndarray) -> np.ndarray:
    """Row mask of grid points that satisfy every constraint within tolerance."""
    ok = np.ones(X.shape[0], dtype=bool)
    for con in problem.constraints:
        gap = _grid_values(con.body, X) - con.rhs
        viol = np.abs(gap) if con.sense == EQ else np.maximum(gap, 0.0)
        ok &= viol <= 1e-6 * max(1.0, abs(con.rhs))
    return ok


def _chunk(lbs: np.ndarray, sizes: np.ndarray, start: int, stop: int) -> np.ndarray:
    # mixed radix with the first variable most significant, i.e. lexicographic order
    idx = np.arange(start, stop, dtype=np.int64)
    X = np.empty((idx.size, sizes.size), dtype=np.int64)
    for col in range(sizes.size - 1, -1, -1):
        X[:, col] = lbs[col] + idx % sizes[col]
        idx //= sizes[col]
    return X


def brute_force(problem: Problem, max_points: int = 1_000_000, chunk: int = 200_000) -> OracleResult:
    """Enumerate the full integer box and return the lexicographically first optimum."""
    for v in problem.variables:
        if math.isinf(v.lb) or math.isinf(v.ub):
            raise UnboundedDomain(f"variable {v.name!r} is unbounded")
    lbs = np.array([int(v.lb) for v in problem.variables], dtype=np.int64)
    sizes = np.array([int(v.ub) - int(v.lb) + 1 for v in problem.variables], dtype=np.int64)
    total = math.prod(int(s) for s in sizes)
    if total > max_points:
        return OracleResult(TOO_LARGE, enumerated_count=0)

    best_obj, best_x = math.inf, None
    for start in range(0, total, chunk):
        X = _chunk(lbs, sizes, start, min(total, start + chunk))
        mask = grid_feasible(problem, X)
        if not mask.any():
            continue
        obj = _grid_values(problem.objective, X)
        obj[~mask] = np.inf
        k = int(np.argmin(obj))
        if obj[k] < best_obj:
            best_obj, best_x = float(obj[k]), tuple(int(x) for x in X[k])
    if best_x is None:
        return OracleResult(INFEASIBLE, enumerated_count=total)
    if problem.sense_original == "max":
        best_obj = -best_obj
    return OracleResult(OPTIMAL, best_obj + 0.0, best_x, total)


def _coef(rng: np.random.Generator, lo: int, hi: int) -> float:
    c = 0
    while c == 0:
        c = int(rng.integers(lo, hi + 1))
    return float(c)


def _random_expr(rng, vars_, quadratic: bool, lo: int, hi: int, density: float) -> tuple[dict, dict]:
    linear = {j: _coef(rng, lo, hi) for j in vars_ if rng.random() < density}
    quad = {}
    if quadratic:
        for a_ in range(len(vars_)):
            for b_ in range(a_, len(vars_)):
                if rng.random() < density:
                    quad[(vars_[a_], vars_[b_])] = _coef(rng, lo, hi)
        if not quad:
            j = vars_[int(rng.integers(len(vars_)))]
            quad[(j, j)] = _coef(rng, lo, hi)
    if not linear and not quad:
        linear[vars_[int(rng.integers(len(vars_)))]] = _coef(rng, lo, hi)
    return linear, quad


def gen_random(category: str, n: int, m: int, bound_width: int = 5,
               coeff_range: tuple[int, int] = (-10, 10), density: float = 0.6,
               seed: int = 0, eq_fraction: float = 0.25, free_fraction: float = 0.0,
               slack: int = 3, name: str | None = None) -> Problem:
    """Random integer instance of the given category with a planted feasible point.

    Constraint right-hand sides are set from a hidden random point so every
    instance is feasible: ``<=`` rows get a random nonnegative slack up to
    ``slack``; a fraction ``eq_fraction`` of rows are equalities through the
    point.  ``free_fraction`` of the variables are kept out of all rows.
    """
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}")
    if n < 1 or m < 0 or bound_width < 0 or not 0 < density <= 1:
        raise ValueError("invalid size parameters")
    if category == "QUBO" and m != 0:
        raise ValueError("QUBO instances have no constraints")
    if category != "QUBO" and m == 0:
        raise ValueError(f"{category} instances need at least one constraint")
    lo, hi = coeff_range
    if lo > hi or (lo == 0 and hi == 0):
        raise ValueError("invalid coefficient range")

    rng = np.random.default_rng(seed)
    variables = [Variable(j, f"x{j}", -bound_width, bound_width) for j in range(n)]
    n_free = min(n - 1, int(round(free_fraction * n))) if m else 0
    constrained = list(range(n - n_free))
    hidden = [int(v) for v in rng.integers(-bound_width, bound_width + 1, size=n)]

    quad_obj = category in ("QUBO", "LCQP", "QCQP")
    quad_con = category in ("QCLP", "QCQP")
    lin, quad = _random_expr(rng, list(range(n)), quad_obj, lo, hi, density)
    # keep every free variable in the objective
    for j in range(n - n_free, n):
        if j not in lin and not any(j in k for k in quad):
            lin[j] = _coef(rng, lo, hi)
    objective = QuadExpr(0.0, dict(sorted(lin.items())), dict(sorted(quad.items())))

    constraints = []
    for i in range(m):
        vars_ = [j for j in constrained if rng.random() < density] or \
            [constrained[int(rng.integers(len(constrained)))]]
        lin, quad = _random_expr(rng, vars_, quad_con, lo, hi, density)
        body = QuadExpr(0.0, dict(sorted(lin.items())), dict(sorted(quad.items())))
        act = body.evaluate(hidden)
        if rng.random() < eq_fraction:
            constraints.append(Constraint(i, f"c{i}", body, EQ, act))
        else:
            constraints.append(Constraint(i, f"c{i}", body, LE, act + int(rng.integers(0, slack + 1))))
    if quad_con and not any(c.body.quadratic for c in constraints):
        raise AssertionError("quadratic constraint category without quadratic rows")
    name = name or f"rand_{category.lower()}_n{n}_m{m}_s{seed}"
    return Problem(name, "min", variables, objective, constraints)
