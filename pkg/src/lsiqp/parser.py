"""Instance readers (QPLIB and the canonical JSON format) and solution writers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import jsonschema

from .model import EQ, GE, INF, LE, Problem

if TYPE_CHECKING:
    from .search import SolveResult


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnsupportedInstance(ValueError):
    """The file is well formed but outside what this solver handles."""


@dataclass
class RawVariable:
    name: str
    lb: float = -INF
    ub: float = INF
    integer: bool = True


@dataclass
class RawExpr:
    constant: float = 0.0
    linear: dict[int, float] = field(default_factory=dict)
    # monomial convention, any order, duplicates allowed
    quadratic: list[tuple[int, int, float]] = field(default_factory=list)


@dataclass
class RawConstraint:
    name: str
    sense: str
    rhs: float
    expr: RawExpr = field(default_factory=RawExpr)


@dataclass
class RawProblem:
    name: str
    sense: str
    variables: list[RawVariable]
    objective: RawExpr
    constraints: list[RawConstraint]


# --------------------------------------------------------------------------
# QPLIB
# --------------------------------------------------------------------------

_OBJ_TYPES = "LDCQ"
_VAR_TYPES = "CBMIG"
_CON_TYPES = "NBLCQ"


class _Lines:
    """Cursor over the non-comment lines of a QPLIB file."""

    def __init__(self, text: str):
        self.lines = []
        for no, line in enumerate(text.splitlines(), start=1):
            s = line.strip()
            if not s or s.startswith("!") or s.startswith("#"):
                continue
            self.lines.append((no, s))
        self.pos = 0
        self.last_no = len(text.splitlines())

    def next(self, what: str) -> tuple[int, list[str]]:
        if self.pos >= len(self.lines):
            raise ParseError(f"unexpected end of file while reading {what}", self.last_no + 1)
        no, s = self.lines[self.pos]
        self.pos += 1
        return no, s.split()

    def done(self) -> bool:
        return self.pos >= len(self.lines)

    def word(self, what: str) -> tuple[int, str]:
        no, toks = self.next(what)
        return no, toks[0]

    def int(self, what: str) -> int:
        no, toks = self.next(what)
        return _int(toks[0], no, what)

    def float(self, what: str) -> float:
        no, toks = self.next(what)
        return _float(toks[0], no, what)

    def records(self, what: str, nints: int) -> list[tuple[int, list[int], float]]:
        """Read a count line followed by that many ``idx... value`` lines."""
        count = self.int(f"number of {what}")
        if count < 0:
            raise ParseError(f"negative count for {what}", self.lines[self.pos - 1][0])
        out = []
        for _ in range(count):
            no, toks = self.next(what)
            if len(toks) < nints + 1:
                raise ParseError(f"expected {nints} indices and a value for {what}", no)
            idx = [_int(t, no, what) for t in toks[:nints]]
            out.append((no, idx, _float(toks[nints], no, what)))
        return out

    def defaults(self, what: str, size: int) -> list[float]:
        """Default value line, then a sparse list of exceptions (1-based)."""
        default = self.float(f"default {what}")
        vals = [default] * size
        for no, (j,), v in self.records(f"non-default {what}", 1):
            if not 1 <= j <= size:
                raise ParseError(f"index {j} out of range for {what}", no)
            vals[j - 1] = v
        return vals


def _int(tok: str, no: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        try:
            f = float(tok)
        except ValueError:
            raise ParseError(f"expected an integer for {what}, got {tok!r}", no) from None
        if f != int(f):
            raise ParseError(f"expected an integer for {what}, got {tok!r}", no) from None
        return int(f)


def _float(tok: str, no: int, what: str) -> float:
    try:
        v = float(tok.replace("D", "E").replace("d", "e"))
    except ValueError:
        raise ParseError(f"expected a number for {what}, got {tok!r}", no) from None
    if math.isnan(v):
        raise ParseError(f"NaN value for {what}", no)
    return v


def _index(i: int, size: int, no: int, what: str) -> int:
    if not 1 <= i <= size:
        raise ParseError(f"{what} index {i} out of range 1..{size}", no)
    return i - 1


def parse_qplib(text: str) -> RawProblem:
    """Read a QPLIB ``.qplib`` file.

    Quadratic entries are lower-triangle entries of ``Q`` in the
    ``0.5 x'Qx`` convention and are converted to monomial coefficients here.
    Two-sided constraints ``c_l <= body <= c_u`` become one EQ row when the
    bounds coincide, and otherwise one row per finite side.
    """
    cur = _Lines(text)
    _, name = cur.word("problem name")
    no, code = cur.word("problem type")
    code = code.upper()
    if len(code) != 3 or code[0] not in _OBJ_TYPES or code[1] not in _VAR_TYPES \
            or code[2] not in _CON_TYPES:
        raise ParseError(f"invalid problem type {code!r}", no)
    otype, vtype, ctype = code
    if vtype in "CM":
        raise UnsupportedInstance(f"{name}: type {code} has continuous variables")
    if otype == "L" and ctype in "NBL":
        raise UnsupportedInstance(f"{name}: type {code} has no quadratic terms")

    no, sense = cur.word("objective sense")
    sense = sense.lower()
    if sense.startswith("min"):
        sense = "min"
    elif sense.startswith("max"):
        sense = "max"
    else:
        raise ParseError(f"expected minimize or maximize, got {sense!r}", no)

    n = cur.int("number of variables")
    m = cur.int("number of constraints") if ctype not in "NB" else 0
    if n < 1 or m < 0:
        raise ParseError("invalid problem dimensions", cur.lines[cur.pos - 1][0])

    objective = RawExpr()
    if otype != "L":
        for no, (i, j), v in cur.records("objective quadratic entries", 2):
            i, j = _index(i, n, no, "variable"), _index(j, n, no, "variable")
            objective.quadratic.append((i, j, 0.5 * v if i == j else v))
    b0 = cur.defaults("objective linear coefficient", n)
    objective.linear = {j: v for j, v in enumerate(b0) if v != 0.0}
    objective.constant = cur.float("objective constant")

    exprs = [RawExpr() for _ in range(m)]
    if m:
        if ctype in "CQ":
            for no, (c, i, j), v in cur.records("constraint quadratic entries", 3):
                c = _index(c, m, no, "constraint")
                i, j = _index(i, n, no, "variable"), _index(j, n, no, "variable")
                exprs[c].quadratic.append((i, j, 0.5 * v if i == j else v))
        default_a = cur.float("default constraint linear coefficient")
        if default_a != 0.0:
            for e in exprs:
                e.linear = {j: default_a for j in range(n)}
        for no, (c, j), v in cur.records("constraint linear entries", 2):
            c, j = _index(c, m, no, "constraint"), _index(j, n, no, "variable")
            exprs[c].linear[j] = v

    infinity = abs(cur.float("value for infinity"))
    big = min(infinity, 1e20)

    def finite(v):
        if v >= big:
            return INF
        if v <= -big:
            return -INF
        return v

    cl = [finite(v) for v in cur.defaults("constraint lower bound", m)] if m else []
    cu = [finite(v) for v in cur.defaults("constraint upper bound", m)] if m else []

    if vtype == "B":
        lbs, ubs = [0.0] * n, [1.0] * n
    else:
        lbs = [finite(v) for v in cur.defaults("variable lower bound", n)]
        ubs = [finite(v) for v in cur.defaults("variable upper bound", n)]

    integer = [True] * n
    if vtype in "IG":
        types = cur.defaults("variable type", n)
        for j, t in enumerate(types):
            if t == 0:
                integer[j] = False
            elif t == 2:
                lbs[j], ubs[j] = max(lbs[j], 0.0), min(ubs[j], 1.0)
            elif t != 1:
                raise ParseError(f"unknown variable type {t} for variable {j + 1}")
        if not all(integer):
            raise UnsupportedInstance(f"{name}: continuous variables are not supported")

    # starting point and dual values are read and discarded
    cur.defaults("starting value for variables", n)
    if m:
        cur.defaults("starting value for constraint duals", m)
    cur.defaults("starting value for bound duals", n)

    var_names = [f"x{j + 1}" for j in range(n)]
    con_names = [f"c{i + 1}" for i in range(m)]
    if not cur.done():
        _read_names(cur, var_names, "variable names")
    if m and not cur.done():
        _read_names(cur, con_names, "constraint names")
    if not cur.done():
        no, _ = cur.lines[cur.pos]
        raise ParseError("unexpected trailing data", no)

    variables = [RawVariable(var_names[j], lbs[j], ubs[j]) for j in range(n)]
    constraints = []
    for i in range(m):
        lo, hi = cl[i], cu[i]
        if lo > hi:
            raise ParseError(f"constraint {con_names[i]} has lower bound above upper bound")
        if lo == hi:
            constraints.append(RawConstraint(con_names[i], EQ, hi, exprs[i]))
            continue
        both = lo != -INF and hi != INF
        if lo != -INF:
            constraints.append(RawConstraint(con_names[i] + ("_lo" if both else ""), GE, lo, exprs[i]))
        if hi != INF:
            constraints.append(RawConstraint(con_names[i] + ("_hi" if both else ""), LE, hi, exprs[i]))
    return RawProblem(name, sense, variables, objective, constraints)


def _read_names(cur: _Lines, names: list[str], what: str) -> None:
    count = cur.int(f"number of {what}")
    for _ in range(count):
        no, toks = cur.next(what)
        if len(toks) < 2:
            raise ParseError(f"expected index and name for {what}", no)
        names[_index(_int(toks[0], no, what), len(names), no, what)] = toks[1]


# --------------------------------------------------------------------------
# canonical JSON format
# --------------------------------------------------------------------------

_NUMBER = {"type": "number"}
_QUAD = {
    "type": "array",
    "items": {"type": "array", "prefixItems": [{"type": "integer"}, {"type": "integer"}, _NUMBER],
              "minItems": 3, "maxItems": 3, "items": _NUMBER},
}
_LINEAR = {"type": "object", "additionalProperties": _NUMBER}

CANONICAL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "sense", "variables", "objective", "constraints"],
    "properties": {
        "name": {"type": "string"},
        "sense": {"enum": ["min", "max"]},
        "variables": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "lb", "ub"],
                "properties": {
                    "name": {"type": "string"},
                    "lb": {"anyOf": [_NUMBER, {"const": "-inf"}]},
                    "ub": {"anyOf": [_NUMBER, {"const": "inf"}]},
                },
            },
        },
        "objective": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"constant": _NUMBER, "linear": _LINEAR, "quadratic": _QUAD},
        },
        "constraints": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "sense", "rhs"],
                "properties": {
                    "name": {"type": "string"},
                    "sense": {"enum": ["le", "ge", "eq"]},
                    "rhs": _NUMBER,
                    "linear": _LINEAR,
                    "quadratic": _QUAD,
                },
            },
        },
    },
}

_SENSES = {"le": LE, "ge": GE, "eq": EQ}


def _reject_constant(tok):
    raise ValueError(f"non-finite number {tok}")


def parse_canonical(text: str) -> RawProblem:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except (json.JSONDecodeError, ValueError) as exc:
        raise ParseError(f"invalid JSON: {exc}", getattr(exc, "lineno", None)) from None
    try:
        jsonschema.validate(doc, CANONICAL_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ParseError(f"schema violation at {path}: {exc.message}") from None

    index: dict[str, int] = {}
    variables = []
    for v in doc["variables"]:
        if v["name"] in index:
            raise ParseError(f"duplicate variable name {v['name']!r}")
        index[v["name"]] = len(variables)
        lb = -INF if v["lb"] == "-inf" else v["lb"]
        ub = INF if v["ub"] == "inf" else v["ub"]
        variables.append(RawVariable(v["name"], lb, ub))
    n = len(variables)

    def expr(d: dict, where: str, constant: float = 0.0) -> RawExpr:
        linear = {}
        for name, c in d.get("linear", {}).items():
            if name not in index:
                raise ParseError(f"{where}: undeclared variable {name!r}")
            linear[index[name]] = c
        quad = []
        for i, j, c in d.get("quadratic", []):
            if not (0 <= i < n and 0 <= j < n):
                raise ParseError(f"{where}: quadratic index ({i}, {j}) out of range")
            if i > j:
                raise ParseError(f"{where}: quadratic entry ({i}, {j}) must have i <= j")
            quad.append((i, j, c))
        return RawExpr(constant, linear, quad)

    obj = doc["objective"]
    objective = expr(obj, "objective", obj.get("constant", 0))
    constraints = [
        RawConstraint(c["name"], _SENSES[c["sense"]], c["rhs"], expr(c, f"constraint {c['name']!r}"))
        for c in doc["constraints"]
    ]
    return RawProblem(doc["name"], doc["sense"], variables, objective, constraints)


def _bound(v: float, inf_token: str):
    if math.isinf(v):
        return inf_token
    return int(v) if float(v).is_integer() else v


def write_canonical(problem: Problem) -> str:
    """Serialize a normalized problem; the objective is written in its original sense."""
    raw = problem.to_raw()
    names = [v.name for v in raw.variables]

    def expr(e: RawExpr) -> dict:
        return {
            "linear": {names[j]: c for j, c in sorted(e.linear.items())},
            "quadratic": [[i, j, c] for i, j, c in e.quadratic],
        }

    doc = {
        "name": raw.name,
        "sense": raw.sense,
        "variables": [{"name": v.name, "lb": _bound(v.lb, "-inf"), "ub": _bound(v.ub, "inf")}
                      for v in raw.variables],
        "objective": {"constant": raw.objective.constant, **expr(raw.objective)},
        "constraints": [
            {"name": c.name, "sense": c.sense.lower(), "rhs": c.rhs, **expr(c.expr)}
            for c in raw.constraints
        ],
    }
    return json.dumps(doc, indent=1)


def load_problem(path, fmt: str | None = None) -> Problem:
    """Read and normalize an instance file; ``fmt`` defaults by extension."""
    from .model import normalize

    path = str(path)
    if fmt is None:
        fmt = "qplib" if path.lower().endswith(".qplib") else "canonical"
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    raw = parse_qplib(text) if fmt == "qplib" else parse_canonical(text)
    return normalize(raw)


# --------------------------------------------------------------------------
# solutions
# --------------------------------------------------------------------------

def _num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(float(v))


def write_solution(result: "SolveResult", fmt: str = "text", timing: bool = True) -> str:
    """Render a solve result.  ``timing=False`` drops wall-clock fields."""
    st = result.stats
    stats = [("iterations", st.iterations), ("weight_updates", st.weight_updates),
             ("mode_switches", st.mode_switches), ("iteration_of_best", st.iteration_of_best)]
    if timing:
        stats += [("time_to_best", f"{st.time_to_best:.6f}"), ("elapsed", f"{st.elapsed:.6f}")]
    feasible = result.status == "FEASIBLE"
    lines = []
    if fmt == "machine":
        lines.append(f"instance={result.instance}")
        lines.append(f"status={result.status}")
        if feasible:
            lines.append(f"objective={_num(result.best_obj)}")
        lines += [f"{k}={v}" for k, v in stats]
        if feasible:
            lines += [f"var {name} {val}" for name, val in zip(result.variable_names, result.best_assignment)]
    elif fmt == "text":
        lines.append(f"instance   : {result.instance}")
        lines.append(f"status     : {result.status}")
        if feasible:
            lines.append(f"objective  : {_num(result.best_obj)} ({result.sense})")
        lines.append("stats      : " + ", ".join(f"{k}={v}" for k, v in stats))
        if feasible:
            width = max(len(nm) for nm in result.variable_names)
            lines += [f"  {name:<{width}} = {val}" for name, val in zip(result.variable_names, result.best_assignment)]
    else:
        raise ValueError(f"unknown solution format {fmt!r}")
    return "\n".join(lines) + "\n"


@dataclass
class SolutionFile:
    status: str
    objective: float | None
    values: dict[str, int]
    fields: dict[str, str]


def read_solution(text: str) -> SolutionFile:
    """Parse the machine solution format written by :func:`write_solution`."""
    fields: dict[str, str] = {}
    values: dict[str, int] = {}
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("var "):
            parts = s.split()
            if len(parts) != 3:
                raise ParseError("expected 'var name value'", no)
            if parts[1] in values:
                raise ParseError(f"variable {parts[1]!r} listed twice", no)
            values[parts[1]] = _int(parts[2], no, "variable value")
        elif "=" in s:
            k, v = s.split("=", 1)
            fields[k.strip()] = v.strip()
        else:
            raise ParseError(f"unrecognized line {s!r}", no)
    if "status" not in fields:
        raise ParseError("missing status line")
    obj = fields.get("objective")
    return SolutionFile(fields["status"], None if obj is None else float(obj), values, fields)
