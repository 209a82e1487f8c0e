"""Acceptance criteria, each run at its stated size and tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (repeated in the
terminal summary).  Criteria 3 to 5 are long: about 7, 5 and 4 minutes on
one core.
"""

import math
import os
import random
import time
from pathlib import Path

import numpy as np
import pytest

from lsiqp.cli import aggregate
from lsiqp.evaluator import apply_move, init_state
from lsiqp.model import EQ, LE, Constraint, Problem, QuadExpr, Variable, normalize
from lsiqp.operators import KICK, Move, exp_move, free_move, inc_move, sat_moves
from lsiqp.oracle import CATEGORIES, OPTIMAL, brute_force, gen_random
from lsiqp.parser import ParseError, load_problem, parse_canonical, parse_qplib, write_canonical, write_solution
from lsiqp.search import FEASIBLE, SolverConfig, solve

from conftest import DATA, record

pytestmark = pytest.mark.acceptance


# ---- 1. operator soundness --------------------------------------------------------

CASES = 10_000


def _rand_expr(rng, vars_, quadratic):
    lin = {j: float(rng.randint(-10, 10)) for j in vars_ if rng.random() < 0.8}
    quad = {}
    if quadratic:
        for a in vars_:
            for b in vars_:
                if a <= b and rng.random() < 0.5:
                    quad[(a, b)] = float(rng.randint(-10, 10))
    return QuadExpr(0.0, lin, quad)


def _case_problem(rng, kind):
    """Random problem plus assignment; rows are placed relative to the assignment.

    ``kind`` selects the row type the operator needs: violated rows for sat,
    satisfied inequalities for exp, satisfied equalities for inc.
    """
    n = 5
    bounds = [(-rng.randint(0, 12), rng.randint(0, 12)) for _ in range(n)]
    variables = [Variable(j, f"x{j}", lb, ub) for j, (lb, ub) in enumerate(bounds)]
    alpha = [rng.randint(lb, ub) for lb, ub in bounds]
    objective = _rand_expr(rng, list(range(n)), True)
    cons = []
    for i in range(40):
        vars_ = rng.sample(range(n), rng.randint(1, 3))
        body = _rand_expr(rng, vars_, rng.random() < 0.6)
        if not body.variables():
            continue
        act = body.evaluate(alpha)
        if kind == "sat":
            sense = EQ if rng.random() < 0.3 else LE
            rhs = act - rng.randint(1, 60)
        elif kind == "exp":
            sense, rhs = LE, act + rng.randint(0, 30)
        else:
            sense, rhs = EQ, act
        cons.append(Constraint(len(cons), f"c{i}", body, sense, rhs))
    p = Problem("case", "min", variables, objective, cons)
    s = init_state(p)
    for j, v in enumerate(alpha):
        s.set_value(j, v)
    return p, s


def _holds(con, values):
    gap = con.body.evaluate(values) - con.rhs
    tol = 1e-6 * max(1.0, abs(con.rhs))
    return abs(gap) <= tol if con.sense == EQ else gap <= tol


def _after(values, move):
    out = list(values)
    for j, v in move.changes:
        out[j] = v
    return out


def _in_bounds(p, values):
    return all(lb <= x <= ub for lb, ub, x in zip(p.lbs, p.ubs, values))


def _check_sat(rng):
    cases = emitted = bad = 0
    while cases < CASES:
        p, s = _case_problem(rng, "sat")
        for i, con in enumerate(p.constraints):
            if not s.violation_at(i, s.activity[i]):
                continue
            for j in p.con_vars[i]:
                cases += 1
                for mv in sat_moves(s, i, j):
                    emitted += 1
                    new = _after(s.alpha, mv)
                    bad += not (_holds(con, new) and _in_bounds(p, new))
    return cases, emitted, bad


def _check_exp(rng):
    cases = emitted = bad = 0
    while cases < CASES:
        p, s = _case_problem(rng, "exp")
        obj = p.objective.evaluate(s.alpha)
        for i, con in enumerate(p.constraints):
            for j in p.con_vars[i]:
                if j not in p.vf:
                    continue
                cases += 1
                mv = exp_move(s, i, j)
                if mv is None:
                    continue
                emitted += 1
                new = _after(s.alpha, mv)
                # only x_j moves, so the objective change is the change of its slice
                bad += not (_holds(con, new) and p.objective.evaluate(new) < obj and _in_bounds(p, new))
    return cases, emitted, bad


def _check_inc(rng):
    cases = emitted = bad = 0
    while cases < CASES:
        p, s = _case_problem(rng, "inc")
        obj = p.objective.evaluate(s.alpha)
        for i, con in enumerate(p.constraints):
            for j in p.con_vars[i]:
                if j not in p.vf:
                    continue
                for xp in p.con_vars[i]:
                    if xp == j:
                        continue
                    cases += 1
                    mv = inc_move(s, i, j, xp)
                    if mv is None:
                        continue
                    emitted += 1
                    new = _after(s.alpha, mv)
                    ok = _holds(con, new) and p.objective.evaluate(new) < obj and _in_bounds(p, new)
                    ok = ok and abs(new[j] - s.alpha[j]) == 1
                    bad += not ok
    return cases, emitted, bad


def _check_free(rng):
    cases = emitted = bad = 0
    while cases < CASES:
        n = 8
        bounds = [(-rng.randint(0, 15), rng.randint(0, 15)) for _ in range(n)]
        variables = [Variable(j, f"x{j}", lb, ub) for j, (lb, ub) in enumerate(bounds)]
        objective = _rand_expr(rng, list(range(n)), True)
        p = Problem("free", "min", variables, objective, [])
        s = init_state(p)
        for j, (lb, ub) in enumerate(bounds):
            s.set_value(j, rng.randint(lb, ub))
        for j in sorted(p.free_vars):
            cases += 1
            lb, ub = bounds[j]

            def value(x):
                return p.objective.evaluate(_after(s.alpha, Move(KICK, j, x)))

            best = min(value(x) for x in range(lb, ub + 1))
            mv = free_move(s, j)
            if mv is None:
                bad += value(s.alpha[j]) != best
            else:
                emitted += 1
                bad += not (lb <= mv.value <= ub and value(mv.value) == best)
    return cases, emitted, bad


def test_criterion_1_operator_soundness():
    rng = random.Random(20240101)
    t0 = time.perf_counter()
    results = {name: fn(rng) for name, fn in
               (("sat", _check_sat), ("exp", _check_exp), ("inc", _check_inc), ("free", _check_free))}
    elapsed = time.perf_counter() - t0
    ok = all(c >= CASES and e > 0 and b == 0 for c, e, b in results.values()) and elapsed < 10
    detail = ", ".join(f"{k}: {c} cases/{e} moves/{b} bad" for k, (c, e, b) in results.items())
    record(1, ok, f"{detail}; {elapsed:.1f}s (limit 10s)")
    for name, (cases, emitted, bad) in results.items():
        assert cases >= CASES and emitted > 0, name
        assert bad == 0, f"{name}: {bad} moves break their postcondition"
    assert elapsed < 10


# ---- 2. incremental evaluation ------------------------------------------------------

def test_criterion_2_incremental_equivalence():
    # non-integral coefficients so that rounding drift would show
    p = _float_variant(gen_random("QCQP", 20, 15, seed=77), np.random.default_rng(77), open_bounds=False)
    s = init_state(p, seed=77)
    rng = random.Random(77)
    t0 = time.perf_counter()
    worst = 0.0
    moves = 100_000
    for k in range(1, moves + 1):
        j = rng.randrange(p.n)
        v = rng.randint(int(p.lbs[j]), int(p.ubs[j]))
        if rng.random() < 0.25:
            jj = rng.randrange(p.n)
            mv = Move(KICK, j, v, jj, rng.randint(int(p.lbs[jj]), int(p.ubs[jj])))
        else:
            mv = Move(KICK, j, v)
        apply_move(s, mv)
        if k % 10_000 == 0 or k == moves:
            for i, c in enumerate(p.constraints):
                ref = c.body.evaluate(s.alpha)
                worst = max(worst, abs(s.activity[i] - ref) / (1 + abs(ref)))
            ref = p.objective.evaluate(s.alpha)
            worst = max(worst, abs(s.obj_value - ref) / (1 + abs(ref)))
            expected = sorted(i for i, c in enumerate(p.constraints) if not _holds(c, s.alpha))
            assert sorted(s.violated) == expected
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 30
    record(2, ok, f"{moves} moves, worst relative gap {worst:.2e} (limit 1e-6); {elapsed:.1f}s (limit 30s)")
    assert worst <= 1e-6
    assert elapsed < 30


# ---- 3. oracle gap ---------------------------------------------------------------------

def oracle_corpus():
    rng = np.random.default_rng(2024)
    for cat in CATEGORIES:
        for k in range(50):
            n = int(rng.integers(2, 6))
            m = 0 if cat == "QUBO" else int(rng.integers(1, 5))
            yield gen_random(cat, n, m, bound_width=5, coeff_range=(-10, 10), density=0.6,
                             seed=1000 * CATEGORIES.index(cat) + k)


def test_criterion_3_oracle_gap():
    t0 = time.perf_counter()
    rows = []
    for p in oracle_corpus():
        o = brute_force(p)
        r = solve(p, SolverConfig(time_limit=2.0, seed=1))
        rows.append((p, o, r))
    elapsed = time.perf_counter() - t0

    feasible = [(p, o, r) for p, o, r in rows if o.status == OPTIMAL]
    found = [x for x in feasible if x[2].status == FEASIBLE]
    optimal = [x for x in found if abs(x[2].best_obj - x[1].opt_obj) <= 1e-6 * max(1, abs(x[1].opt_obj))]
    below = [x[0].name for x in found if x[2].best_obj < x[1].opt_obj]
    for cat in CATEGORIES:
        sub = [x for x in feasible if x[0].category == cat]
        print(f"  {cat}: {sum(x[2].status == FEASIBLE for x in sub)}/{len(sub)} feasible, "
              f"{sum(x in optimal for x in sub)} optimal")
    share = len(optimal) / len(feasible)
    ok = len(found) == len(feasible) and share >= 0.8 and not below and elapsed < 600
    record(3, ok, f"{len(found)}/{len(feasible)} feasible, {len(optimal)} optimal ({share:.1%}, need 80%), "
                  f"{len(below)} below oracle; {elapsed:.0f}s (limit 600s)")
    assert len(rows) == 200
    assert not below, f"objective below the proven optimum on {below}"
    assert len(found) == len(feasible)
    assert share >= 0.8
    assert elapsed < 600


# ---- 4. ablations --------------------------------------------------------------------------

ABLATION_LIMIT = 1.0


def ablation_corpus(kind):
    rng = np.random.default_rng({"free": 1, "exp": 2, "inc": 3}[kind])
    for k in range(50):
        cat = ("LCQP", "QCQP")[k % 2]
        n, m = int(rng.integers(6, 11)), int(rng.integers(2, 6))
        if kind == "free":
            yield gen_random(cat, n, m, bound_width=20, free_fraction=0.5, seed=k, name=f"free{k}")
        elif kind == "exp":
            yield gen_random(cat, n, m, bound_width=10, eq_fraction=0.0, seed=100 + k, name=f"ineq{k}")
        else:
            # small coefficients so that equalities admit integral repairs
            yield gen_random("LCQP", n, m, bound_width=10, coeff_range=(-3, 3), eq_fraction=0.8,
                             seed=200 + k, name=f"eq{k}")


def _ablate(kind, flag):
    better = loss = 0
    sums = [0.0, 0.0]
    both = 0
    for p in ablation_corpus(kind):
        a = solve(p, SolverConfig(time_limit=ABLATION_LIMIT, seed=1))
        b = solve(p, SolverConfig(time_limit=ABLATION_LIMIT, seed=1, **{flag: True}))
        oa = a.best_obj if a.status == FEASIBLE else None
        ob = b.best_obj if b.status == FEASIBLE else None
        if oa is not None and (ob is None or oa < ob - 1e-9):
            better += 1
        elif ob is not None and (oa is None or ob < oa - 1e-9):
            loss += 1
        if oa is not None and ob is not None:
            both += 1
            sums[0] += oa
            sums[1] += ob
    return better, loss, sums, both


def test_criterion_4_ablations():
    t0 = time.perf_counter()
    free = _ablate("free", "disable_free")
    exp = _ablate("exp", "disable_exp")
    inc = _ablate("inc", "disable_inc")
    elapsed = time.perf_counter() - t0
    ok_free = free[3] > 0 and free[2][0] < free[2][1]
    ok_exp = exp[0] >= exp[1]
    ok_inc = inc[0] >= inc[1]
    ok = ok_free and ok_exp and ok_inc and elapsed < 900
    record(4, ok, f"v_no_free sum {free[2][0]:.0f} vs {free[2][1]:.0f} over {free[3]} (#better {free[0]}, "
                  f"#loss {free[1]}); v_no_exp #better {exp[0]} #loss {exp[1]}; "
                  f"v_no_inc #better {inc[0]} #loss {inc[1]}; {elapsed:.0f}s (limit 900s)")
    assert ok_free and ok_exp and ok_inc
    assert elapsed < 900


# ---- 5. determinism and stability ---------------------------------------------------------

STABILITY_LIMIT = 1.0


def test_criterion_5_determinism_and_stability():
    t0 = time.perf_counter()
    instances = [gen_random(("LCQP", "QCLP", "QCQP", "QUBO")[k % 4], 10, 0 if k % 4 == 3 else 5,
                            bound_width=10, seed=500 + k) for k in range(20)]
    cvs = {}
    for p in instances:
        rows = []
        for seed in range(1, 11):
            r = solve(p, SolverConfig(time_limit=STABILITY_LIMIT, seed=seed))
            rows.append(dict(instance=p.name, category=p.category, time_limit=STABILITY_LIMIT,
                             sense=p.sense_original, status=r.status, objective=r.best_obj))
        agg = aggregate(rows)
        cvs[p.name] = agg.get("cv")
        print(f"  {p.name}: feasible {agg['feasible_count']}/10, best {agg.get('best')}, cv {agg.get('cv')}")

    identical = True
    for p in instances:
        for seed in (1, 7):
            cfg = SolverConfig(time_limit=600, seed=seed, max_iterations=3000)
            a = write_solution(solve(p, cfg), "machine", timing=False).encode()
            b = write_solution(solve(p, cfg), "machine", timing=False).encode()
            identical &= a == b
    elapsed = time.perf_counter() - t0

    have_cv = [v for v in cvs.values() if v is not None]
    low = sum(v < 0.1 for v in have_cv)
    ok = len(have_cv) == 20 and identical and elapsed < 600
    record(5, ok, f"cv for {len(have_cv)}/20 instances, {low}/20 below 0.1 (informative, target >80%); "
                  f"byte-identical reruns: {identical}; {elapsed:.0f}s (limit 600s)")
    assert len(have_cv) == 20
    assert identical
    assert elapsed < 600


# ---- 6. format round trip -------------------------------------------------------------------

def _float_variant(p, rng, open_bounds=True):
    """Copy of ``p`` with non-integral coefficients, some infinite bounds and a random sense."""
    def scale(e):
        return QuadExpr(float(rng.normal()),
                        {j: c * float(rng.normal()) for j, c in e.linear.items()},
                        {k: c * float(rng.normal()) for k, c in e.quadratic.items()})
    share = 0.2 if open_bounds else 0.0
    variables = [Variable(v.index, v.name, -math.inf if rng.random() < share else v.lb,
                          math.inf if rng.random() < share else v.ub) for v in p.variables]
    cons = [Constraint(c.index, c.name, QuadExpr(0.0, scale(c.body).linear, scale(c.body).quadratic),
                       c.sense, c.rhs * float(rng.normal())) for c in p.constraints]
    sense = "max" if rng.random() < 0.5 else "min"
    obj = scale(p.objective)
    return Problem(p.name + "_f", sense, variables, obj.negated() if sense == "max" else obj, cons)


QPLIB_EXPECTED = {
    "tiny_qubo": (4.5, (0, 1, 1)),
    "lcqp_sum": (8.0, (2, 2)),
    "qcqp_named": (-12.0, (3, 4, 0)),
    "qclp_disk": (-6.5, (1, 3)),
    "default_linear": (2.0, (1, 1)),
}

MALFORMED = [  # (line, replacement) against lcqp_sum.qplib
    (3, "QXL"), (4, "sideways"), (5, "two"), (8, "3 3 2.0"), (9, "1 1 abc"), (13, "one"),
]


def test_criterion_6_format_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    exact = 0
    for k in range(100):
        cat = CATEGORIES[k % 4]
        p = gen_random(cat, int(rng.integers(1, 8)), 0 if cat == "QUBO" else int(rng.integers(1, 6)), seed=k)
        if k % 2:
            p = _float_variant(p, rng)
        text = write_canonical(p)
        q = normalize(parse_canonical(text))
        exact += q == p and write_canonical(q) == text

    parsed = 0
    for name, (opt, point) in QPLIB_EXPECTED.items():
        o = brute_force(load_problem(DATA / f"{name}.qplib"))
        parsed += (o.opt_obj, o.opt_assignment) == (opt, point)

    lines = (DATA / "lcqp_sum.qplib").read_text().splitlines()
    located = 0
    for no, text in MALFORMED:
        bad = list(lines)
        bad[no - 1] = text
        try:
            parse_qplib("\n".join(bad))
        except ParseError as e:
            located += e.line == no
    try:
        parse_qplib("\n".join(lines[:20]))
    except ParseError as e:
        located += e.line == 21
    elapsed = time.perf_counter() - t0

    ok = exact == 100 and parsed == len(QPLIB_EXPECTED) and located == len(MALFORMED) + 1 and elapsed < 5
    record(6, ok, f"{exact}/100 canonical round trips exact, {parsed}/{len(QPLIB_EXPECTED)} QPLIB fixtures, "
                  f"{located}/{len(MALFORMED) + 1} malformed files located; {elapsed:.2f}s (limit 5s)")
    assert exact == 100
    assert parsed == len(QPLIB_EXPECTED)
    assert located == len(MALFORMED) + 1
    assert elapsed < 5


# ---- 7. stretch: QPLIB_2036 -----------------------------------------------------------------

def _find_2036():
    dirs = [os.environ.get("LSIQP_QPLIB_DIR"), DATA, Path.cwd(), Path.cwd() / "qplib"]
    for d in filter(None, dirs):
        f = Path(d) / "QPLIB_2036.qplib"
        if f.is_file():
            return f
    return None


def test_criterion_7_stretch_qplib_2036():
    path = _find_2036()
    if path is None:
        record(7, None, "(non-binding): QPLIB_2036.qplib not found; set LSIQP_QPLIB_DIR to run it")
        pytest.skip("QPLIB_2036.qplib not available")
    r = solve(load_problem(path), SolverConfig(time_limit=300, seed=1))
    reached = r.status == FEASIBLE and r.best_obj <= -30590
    # non-binding: the outcome is logged, never asserted
    record(7, reached, f"(non-binding) QPLIB_2036 300s: status {r.status}, objective {r.best_obj} "
                       f"(target <= -30590)")
