"""The four move operators.

Every operator is a pure function of the current state and returns candidate
moves without touching the state.  Candidates outside variable bounds are
dropped rather than clamped, except in :func:`free_move` where clamping keeps
the value optimal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .model import INF

if TYPE_CHECKING:
    from .evaluator import SolverState

SAT = "SAT"
EXP = "EXP"
INC = "INC"
FREE = "FREE"
KICK = "KICK"

ROOT_TOL = 1e-6
SNAP_TOL = 1e-9
# integers beyond this are not exactly representable as floats
MAX_VALUE = 2**53


@dataclass(frozen=True, slots=True)
class Move:
    kind: str
    var: int
    value: int
    aux_var: int | None = None
    aux_value: int | None = None
    origin: int | None = None

    @property
    def changes(self) -> tuple[tuple[int, int], ...]:
        if self.aux_var is None:
            return ((self.var, self.value),)
        return ((self.var, self.value), (self.aux_var, self.aux_value))


@dataclass(frozen=True)
class FeasibleDomain:
    """Values of one variable that keep an inequality satisfied."""

    shape: str  # LEFT_RAY, RIGHT_RAY, INTERVAL, TWO_RAYS, ALL or EMPTY
    x1: float = math.nan
    x2: float = math.nan

    def intervals(self) -> list[tuple[float, float]]:
        s = self.shape
        if s == "LEFT_RAY":
            return [(-INF, self.x1)]
        if s == "RIGHT_RAY":
            return [(self.x1, INF)]
        if s == "INTERVAL":
            return [(self.x1, self.x2)]
        if s == "TWO_RAYS":
            return [(-INF, self.x1), (self.x2, INF)]
        if s == "ALL":
            return [(-INF, INF)]
        return []

    def within(self, lb: float, ub: float) -> list[tuple[float, float]]:
        out = []
        for lo, hi in self.intervals():
            lo, hi = max(lo, lb), min(hi, ub)
            if lo <= hi:
                out.append((lo, hi))
        return out


def _snap(x: float) -> float:
    r = round(x)
    if abs(x - r) <= SNAP_TOL * max(1.0, abs(x)):
        return float(r)
    return x


def _integral(x: float) -> int | None:
    if not math.isfinite(x):
        return None
    r = round(x)
    return int(r) if abs(x - r) <= ROOT_TOL else None


def solve_quadratic(a: float, b: float, c: float) -> tuple[int, tuple[float, ...]]:
    """Sign of the discriminant of ``a*x**2 + b*x + c`` and its real roots, ascending."""
    disc = b * b - 4.0 * a * c
    if abs(disc) <= 1e-12 * max(b * b, abs(4.0 * a * c)):
        return 0, (_snap(-b / (2.0 * a)),)
    if disc < 0:
        return -1, ()
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    r1, r2 = q / a, c / q
    return 1, (_snap(min(r1, r2)), _snap(max(r1, r2)))


def _ok(v, lb, ub, cur) -> bool:
    return v != cur and lb <= v <= ub and abs(v) <= MAX_VALUE


def sat_moves(state: "SolverState", i: int, j: int) -> list[Move]:
    """Move ``x_j`` to the threshold value(s) that satisfy violated row ``i``."""
    p = state.problem
    cur = state.alpha[j]
    lb, ub = p.lbs[j], p.ubs[j]
    a, h, rest = state.con_view(i, j)
    rhs = state.rhs[i]
    cands: list[float] = []
    if a == 0:
        if h == 0:
            return []
        nu = _snap((rhs - rest) / h)
        cands.append(math.floor(nu) if h > 0 else math.ceil(nu))
    else:
        sign, roots = solve_quadratic(a, h, rest - rhs)
        if sign < 0:
            return []
        if sign == 0:
            r = _integral(roots[0])
            if r is not None:
                cands.append(r)
        else:
            x1, x2 = roots
            if a > 0:
                cands += [math.ceil(x1), math.floor(x2)]
            else:
                cands += [math.floor(x1), math.ceil(x2)]

    out = []
    tol = state.tol[i]
    eq = state.is_eq[i]
    for v in dict.fromkeys(cands):
        if not _ok(v, lb, ub, cur):
            continue
        resid = a * v * v + h * v + rest - rhs
        if (abs(resid) if eq else resid) <= tol:
            out.append(Move(SAT, j, int(v), origin=i))
    return out


def feasible_domain(a: float, h: float, rest: float, rhs: float) -> FeasibleDomain:
    """Domain of ``x`` with ``a*x**2 + h*x + rest <= rhs``."""
    if a == 0:
        if h == 0:
            return FeasibleDomain("ALL") if rest <= rhs else FeasibleDomain("EMPTY")
        x0 = _snap((rhs - rest) / h)
        return FeasibleDomain("RIGHT_RAY", x0) if h < 0 else FeasibleDomain("LEFT_RAY", x0)
    sign, roots = solve_quadratic(a, h, rest - rhs)
    if a > 0:
        if sign < 0:
            return FeasibleDomain("EMPTY")
        if sign == 0:
            return FeasibleDomain("INTERVAL", roots[0], roots[0])
        return FeasibleDomain("INTERVAL", *roots)
    if sign > 0:
        return FeasibleDomain("TWO_RAYS", *roots)
    return FeasibleDomain("ALL")


def _argmin(points, theta):
    best = None
    for x in sorted(points):
        if best is None or theta(x) < theta(best):
            best = x
    return best


def _decreases(new: float, cur: float) -> bool:
    return new < cur - 1e-12 * max(1.0, abs(cur))


def exp_move(state: "SolverState", i: int, j: int) -> Move | None:
    """Move objective variable ``x_j`` inside the feasible domain of satisfied inequality ``i``."""
    if state.is_eq[i]:
        return None
    p = state.problem
    cur = state.alpha[j]
    a, h, rest = state.con_view(i, j)
    rhs = state.rhs[i]
    dom = feasible_domain(a, h, rest, rhs).within(p.lbs[j], p.ubs[j])
    if not dom:
        return None
    w, k = state.obj_view(j)

    def theta(x):
        return w * x * x + k * x

    if w == 0:
        if k == 0:
            return None
        if k < 0:
            xmin = max(hi for _, hi in dom)
        else:
            xmin = min(lo for lo, _ in dom)
        if math.isinf(xmin):
            return None
    elif w > 0:
        xi = _snap(k / (-2.0 * w))
        xmin, gap = None, INF
        for lo, hi in dom:
            x = min(max(xi, lo), hi)
            if abs(x - xi) < gap:
                xmin, gap = x, abs(x - xi)
    else:
        ends = [e for iv in dom for e in iv]
        if any(math.isinf(e) for e in ends):
            return None
        xmin = _argmin(ends, theta)

    def inside(v):
        return any(lo <= v <= hi for lo, hi in dom)

    v = math.ceil(xmin)
    if not inside(v):
        v = math.floor(xmin)
        if not inside(v):
            return None
    if not _ok(v, p.lbs[j], p.ubs[j], cur) or not _decreases(theta(v), theta(cur)):
        return None
    if a * v * v + h * v + rest - rhs > state.tol[i]:
        return None
    return Move(EXP, j, int(v), origin=i)


def _integer_roots(a: float, h: float, c: float, lb: float, ub: float) -> list[int]:
    """Integer solutions of ``a*y**2 + h*y + c = 0`` within bounds (not residual-checked)."""
    if a == 0:
        if h == 0:
            return []
        roots: tuple[float, ...] = (-c / h,)
    else:
        sign, roots = solve_quadratic(a, h, c)
        if sign < 0:
            return []
    out = []
    for r in roots:
        y = _integral(r)
        if y is not None and lb <= y <= ub and abs(y) <= MAX_VALUE:
            out.append(y)
    return sorted(set(out))


def inc_move(state: "SolverState", i: int, j: int, xp: int, literal: bool = False) -> Move | None:
    """Step ``x_j`` by one and repair satisfied equality ``i`` through ``x'``.

    With ``literal`` the acceptance test only looks at objective monomials
    containing both variables; otherwise at every term touching either one,
    which is the objective change of the pair move.
    """
    if not state.is_eq[i] or xp == j:
        return None
    p = state.problem
    vals = state.alpha
    cur = vals[j]
    w, k = state.obj_view(j)
    base = w * cur * cur + k * cur
    x_inc, best = None, 0.0
    for step in (-1, 1):
        v = cur + step
        if not p.lbs[j] <= v <= p.ubs[j]:
            continue
        d = w * v * v + k * v - base
        if _decreases(d + base, base) and (x_inc is None or d < best):
            x_inc, best = v, d
    if x_inc is None:
        return None

    terms = p.con_terms[i]
    a1, lin1, adj1 = terms[j]
    h1 = lin1
    for kk, c in adj1:
        h1 += c * vals[kk]
    body = state.activity[i] + h1 * (x_inc - cur) + a1 * (x_inc * x_inc - cur * cur)

    a2, lin2, adj2 = terms[xp]
    h2 = lin2
    for kk, c in adj2:
        h2 += c * (x_inc if kk == j else vals[kk])
    vp = vals[xp]
    rest2 = body - a2 * vp * vp - h2 * vp
    rhs, tol = state.rhs[i], state.tol[i]
    if a2 == 0 and h2 == 0:
        # x' no longer matters; the row holds or fails on its own
        roots = [vp] if abs(rest2 - rhs) <= tol else []
    else:
        roots = _integer_roots(a2, h2, rest2 - rhs, p.lbs[xp], p.ubs[xp])

    if literal:
        lo, hi = min(j, xp), max(j, xp)
        cross = p.objective.quadratic.get((lo, hi), 0.0)
    for r in roots:
        if abs(a2 * r * r + h2 * r + rest2 - rhs) > tol:
            continue
        if literal:
            before, after = cross * cur * vp, cross * x_inc * r
        else:
            before = state.obj_value
            _, after = state.probe(((j, x_inc), (xp, r)))
        if _decreases(after, before):
            return Move(INC, j, x_inc, xp, r, origin=i)
    return None


def free_move(state: "SolverState", j: int) -> Move | None:
    """Minimize the objective slice of a variable that occurs in no constraint.

    A linear slice moves to the bound in its improving direction (one step
    when that bound is infinite); a concave slice moves to the better finite
    bound and is left alone when a bound is infinite.
    """
    p = state.problem
    cur = state.alpha[j]
    lb, ub = p.lbs[j], p.ubs[j]
    w, k = state.obj_view(j)

    def theta(x):
        return w * x * x + k * x

    if w > 0:
        xi = k / (-2.0 * w)
        if not math.isfinite(xi) or abs(xi) > MAX_VALUE:
            return None
        lo = math.floor(xi)
        v = lo if theta(lo) <= theta(lo + 1) else lo + 1
        v = min(max(v, lb), ub)
    elif w == 0:
        if k > 0:
            v = lb if lb != -INF else cur - 1
        elif k < 0:
            v = ub if ub != INF else cur + 1
        else:
            return None
    else:
        if math.isinf(lb) or math.isinf(ub):
            return None
        v = lb if theta(lb) <= theta(ub) else ub
    v = int(v)
    if not _ok(v, lb, ub, cur) or not _decreases(theta(v), theta(cur)):
        return None
    return Move(FREE, j, v)
