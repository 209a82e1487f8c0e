import math
from pathlib import Path

from lsiqp.model import normalize
from lsiqp.parser import RawConstraint, RawExpr, RawProblem, RawVariable

DATA = Path(__file__).parent / "data"


def expr(names, linear=None, quad=None, constant=0.0):
    """RawExpr from name-keyed dicts, e.g. ``quad={("x", "y"): 3}``."""
    idx = {nm: j for j, nm in enumerate(names)}
    return RawExpr(constant,
                   {idx[k]: float(v) for k, v in (linear or {}).items()},
                   [(idx[a], idx[b], float(v)) for (a, b), v in (quad or {}).items()])


def make(variables, objective=None, constraints=(), sense="min", name="t"):
    """Normalized problem from a compact description.

    ``variables`` maps names to ``(lb, ub)``; ``objective`` is ``(linear, quad)``
    or ``(linear, quad, constant)``; constraints are ``(sense, rhs, linear, quad)``.
    """
    names = list(variables)
    raw_vars = [RawVariable(nm, lb, ub) for nm, (lb, ub) in variables.items()]
    obj = expr(names, *(objective or ({}, {})))
    cons = [RawConstraint(f"c{i}", s, float(rhs), expr(names, lin, quad))
            for i, (s, rhs, lin, quad) in enumerate(constraints)]
    return normalize(RawProblem(name, sense, raw_vars, obj, cons))


INF = math.inf


# ---- acceptance reporting -------------------------------------------------------

ACCEPTANCE: list[str] = []


def record(criterion: int, passed: bool | None, detail: str) -> None:
    """One report line; ``passed=None`` marks a skipped criterion."""
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    line = f"criterion {criterion}: {status}  {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
