"""Normalized representation of integer quadratic programs.

Expressions use the monomial convention: a quadratic entry ``(i, j, c)`` with
``i <= j`` contributes ``c * x_i * x_j`` (so ``c`` is the coefficient of
``x_i**2`` when ``i == j``).  The half-Hessian convention of the QPLIB format
only exists inside the parser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

if TYPE_CHECKING:
    from .parser import RawProblem

LE = "LE"
EQ = "EQ"
GE = "GE"

INF = math.inf

OBJECTIVE = -1
"""Context id that selects the objective in :func:`coeff_view`."""


class ModelError(ValueError):
    """Raised when a problem cannot be normalized."""


def feas_tol(rhs: float) -> float:
    return 1e-6 * max(1.0, abs(rhs))


def clamp(v: int, lb: float, ub: float) -> int:
    if v < lb:
        return int(lb)
    if v > ub:
        return int(ub)
    return v


@dataclass(frozen=True)
class Variable:
    index: int
    name: str
    lb: float = -INF
    ub: float = INF

    def __post_init__(self):
        if self.lb > self.ub:
            raise ModelError(f"variable {self.name!r}: lb {self.lb} > ub {self.ub}")


@dataclass(frozen=True)
class QuadExpr:
    constant: float = 0.0
    linear: Mapping[int, float] = field(default_factory=dict)
    quadratic: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def variables(self) -> set[int]:
        out = set(self.linear)
        for i, j in self.quadratic:
            out.add(i)
            out.add(j)
        return out

    def terms(self) -> list[tuple[int, int, float]]:
        return [(i, j, c) for (i, j), c in sorted(self.quadratic.items())]

    def is_quadratic(self) -> bool:
        return bool(self.quadratic)

    def evaluate(self, values: Sequence[int]) -> float:
        total = self.constant
        for j, c in self.linear.items():
            total += c * values[j]
        for (i, j), c in self.quadratic.items():
            total += c * values[i] * values[j]
        return total

    def negated(self) -> "QuadExpr":
        return QuadExpr(
            -self.constant,
            {j: -c for j, c in self.linear.items()},
            {k: -c for k, c in self.quadratic.items()},
        )


@dataclass(frozen=True)
class Constraint:
    index: int
    name: str
    body: QuadExpr
    sense: str
    rhs: float


@dataclass(frozen=True)
class CoeffView:
    """Variable-centric slice of an expression: ``A*x**2 + H*x + I``.

    For the objective the same numbers are read as ``W``, ``K`` and ``Theta``
    (the value of ``W*x**2 + K*x``); ``I`` then holds the remaining terms.
    """

    A: float
    H: float
    I: float

    @property
    def W(self) -> float:
        return self.A

    @property
    def K(self) -> float:
        return self.H

    def theta(self, x: float) -> float:
        return self.A * x * x + self.H * x


class Problem:
    """Immutable minimization IQP plus the lookup tables the solver reads.

    ``con_slices[j]`` lists ``(i, A, L, adj)`` for every constraint containing
    variable ``j``, where ``A`` is the coefficient of ``x_j**2``, ``L`` the
    linear coefficient and ``adj`` a tuple of ``(k, c)`` cross terms.  The
    objective has the same layout in ``obj_slices[j]`` (``None`` when ``j``
    does not occur in the objective).
    """

    def __init__(self, name: str, sense_original: str, variables: Sequence[Variable],
                 objective: QuadExpr, constraints: Sequence[Constraint]):
        self.name = name
        self.sense_original = sense_original
        self.variables = tuple(variables)
        self.objective = objective
        self.constraints = tuple(constraints)

        n = len(self.variables)
        self.lbs = tuple(v.lb for v in self.variables)
        self.ubs = tuple(v.ub for v in self.variables)
        self.con_vars = tuple(tuple(sorted(c.body.variables())) for c in self.constraints)

        occurrence: list[list[int]] = [[] for _ in range(n)]
        for i, vs in enumerate(self.con_vars):
            for j in vs:
                occurrence[j].append(i)
        self.occurrence = tuple(tuple(o) for o in occurrence)
        self.vf = frozenset(objective.variables())
        self.free_vars = frozenset(j for j in self.vf if not self.occurrence[j])

        self.con_terms = tuple(_slices(c.body) for c in self.constraints)
        con_slices: list[list] = [[] for _ in range(n)]
        for i, terms in enumerate(self.con_terms):
            for j, (a, lin, adj) in terms.items():
                con_slices[j].append((i, a, lin, adj))
        self.con_slices = tuple(tuple(s) for s in con_slices)
        obj_terms = _slices(objective)
        self.obj_slices = tuple(obj_terms.get(j) for j in range(n))

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def category(self) -> str:
        if not self.constraints:
            return "QUBO"
        quad_cons = any(c.body.is_quadratic() for c in self.constraints)
        quad_obj = self.objective.is_quadratic()
        if quad_cons and quad_obj:
            return "QCQP"
        if quad_cons:
            return "QCLP"
        if quad_obj:
            return "LCQP"
        return "ILP"

    def objective_value(self, values: Sequence[int]) -> float:
        return self.objective.evaluate(values)

    def is_feasible(self, values: Sequence[int]) -> bool:
        return max_violation(self, values)[0] == 0.0

    def to_raw(self) -> "RawProblem":
        """Problem in its original sense, suitable for :func:`normalize`."""
        from .parser import RawConstraint, RawExpr, RawProblem, RawVariable

        obj = self.objective.negated() if self.sense_original == "max" else self.objective
        return RawProblem(
            name=self.name,
            sense=self.sense_original,
            variables=[RawVariable(v.name, v.lb, v.ub) for v in self.variables],
            objective=_to_raw_expr(obj, RawExpr),
            constraints=[
                RawConstraint(c.name, c.sense, c.rhs, _to_raw_expr(c.body, RawExpr))
                for c in self.constraints
            ],
        )

    def __eq__(self, other):
        if not isinstance(other, Problem):
            return NotImplemented
        return (self.name, self.sense_original, self.variables, self.objective,
                self.constraints) == (other.name, other.sense_original, other.variables,
                                      other.objective, other.constraints)

    def __repr__(self):
        return (f"Problem({self.name!r}, {self.category}, n={self.n}, m={self.m}, "
                f"sense={self.sense_original})")


def _to_raw_expr(expr: QuadExpr, cls):
    return cls(constant=expr.constant, linear=dict(expr.linear), quadratic=expr.terms())


def _slices(expr: QuadExpr) -> dict[int, tuple[float, float, tuple]]:
    diag: dict[int, float] = {}
    adj: dict[int, list] = {}
    for (i, j), c in expr.quadratic.items():
        if i == j:
            diag[i] = c
        else:
            adj.setdefault(i, []).append((j, c))
            adj.setdefault(j, []).append((i, c))
    out = {}
    for j in sorted(expr.variables()):
        out[j] = (diag.get(j, 0.0), expr.linear.get(j, 0.0), tuple(adj.get(j, ())))
    return out


def max_violation(problem: Problem, values: Sequence[int]) -> tuple[float, int | None]:
    """Largest constraint violation (0 within tolerance) and the offending row."""
    worst, where = 0.0, None
    for c in problem.constraints:
        act = c.body.evaluate(values)
        v = act - c.rhs if c.sense == LE else abs(act - c.rhs)
        if v > feas_tol(c.rhs) and v > worst:
            worst, where = v, c.index
    return worst, where


def _check_coef(c: float, where: str) -> float:
    c = float(c)
    if not math.isfinite(c):
        raise ModelError(f"non-finite coefficient {c} in {where}")
    return c


def _integer_bound(b: float, lower: bool) -> float:
    if math.isnan(b):
        raise ModelError("NaN bound")
    if math.isinf(b):
        return b
    r = round(b)
    if abs(b - r) <= 1e-9:
        return int(r)
    return int(math.ceil(b)) if lower else int(math.floor(b))


def _merge(constant, linear, quadratic: Iterable, n: int, where: str) -> QuadExpr:
    lin: dict[int, float] = {}
    for j, c in linear.items():
        if not 0 <= j < n:
            raise ModelError(f"variable index {j} out of range in {where}")
        lin[j] = lin.get(j, 0.0) + _check_coef(c, where)
    quad: dict[tuple[int, int], float] = {}
    for i, j, c in quadratic:
        if not (0 <= i < n and 0 <= j < n):
            raise ModelError(f"variable index ({i}, {j}) out of range in {where}")
        key = (i, j) if i <= j else (j, i)
        quad[key] = quad.get(key, 0.0) + _check_coef(c, where)
    return QuadExpr(
        _check_coef(constant, where),
        {j: c for j, c in sorted(lin.items()) if c != 0.0},
        {k: c for k, c in sorted(quad.items()) if c != 0.0},
    )


def normalize(raw: "RawProblem | Problem") -> Problem:
    """Turn a parsed problem into a minimization problem with LE/EQ rows only."""
    if isinstance(raw, Problem):
        raw = raw.to_raw()
    if raw.sense not in ("min", "max"):
        raise ModelError(f"unknown objective sense {raw.sense!r}")

    variables = []
    for idx, rv in enumerate(raw.variables):
        if not getattr(rv, "integer", True):
            raise ModelError(f"variable {rv.name!r} is continuous; only integer variables are supported")
        lb = _integer_bound(float(rv.lb), lower=True)
        ub = _integer_bound(float(rv.ub), lower=False)
        if lb == INF or ub == -INF:
            raise ModelError(f"variable {rv.name!r} has an empty domain")
        variables.append(Variable(idx, rv.name, lb, ub))
    n = len(variables)

    ro = raw.objective
    objective = _merge(ro.constant, ro.linear, ro.quadratic, n, "objective")
    if raw.sense == "max":
        objective = objective.negated()

    constraints = []
    for rc in raw.constraints:
        where = f"constraint {rc.name!r}"
        body = _merge(rc.expr.constant, rc.expr.linear, rc.expr.quadratic, n, where)
        rhs = _check_coef(rc.rhs, where) - body.constant
        body = QuadExpr(0.0, body.linear, body.quadratic)
        sense = rc.sense
        if sense == GE:
            body, rhs, sense = body.negated(), -rhs, LE
        elif sense not in (LE, EQ):
            raise ModelError(f"unknown sense {sense!r} in {where}")
        if not body.variables():
            viol = -rhs if sense == LE else abs(rhs)
            if viol > feas_tol(rhs):
                raise ModelError(f"{where} has no variables and can never hold")
            continue
        constraints.append(Constraint(len(constraints), rc.name, body, sense, rhs + 0.0))

    return Problem(raw.name, raw.sense, variables, objective, constraints)


def coeff_view(problem: Problem, ctx: int, j: int, values: Sequence[int]) -> CoeffView:
    """Decompose constraint ``ctx`` (or the objective, ``ctx=OBJECTIVE``) around ``x_j``.

    ``I`` is computed from scratch, so this is the slow reference path; the
    search state keeps an incremental equivalent.
    """
    if ctx == OBJECTIVE:
        expr = problem.objective
        terms = problem.obj_slices[j]
    else:
        expr = problem.constraints[ctx].body
        terms = problem.con_terms[ctx].get(j)
    if terms is None:
        where = "objective" if ctx == OBJECTIVE else f"constraint {ctx}"
        raise KeyError(f"variable {j} does not occur in {where}")
    a, lin, adj = terms
    h = lin + sum(c * values[k] for k, c in adj)
    x = values[j]
    rest = expr.evaluate(values) - a * x * x - h * x
    return CoeffView(a, h, rest)
