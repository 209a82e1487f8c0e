"""Two-mode local search: repair violated rows, then improve the objective."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .evaluator import SolverState, apply_move, init_state
from .model import INF, Problem, max_violation
from .operators import EXP, FREE, INC, KICK, Move, exp_move, free_move, inc_move, sat_moves
from .scoring import ScoredMove, bms_select, score, update_weights

logger = logging.getLogger(__name__)

FEASIBLE = "FEASIBLE"
NA = "NA"

# satisfying-mode iterations without a new low in the violated count before a kick
STUCK_LIMIT = 50


@dataclass
class SolverConfig:
    time_limit: float = 10.0
    seed: int = 1
    t: int = 100
    zeta: int = 100
    disable_exp: bool = False
    disable_inc: bool = False
    disable_free: bool = False
    literal_both_theta: bool = False
    max_iterations: int | None = None
    escape_stalls: bool = True
    kick: str = "uniform"

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t (BMS samples) must be >= 1")
        if self.zeta < 1:
            raise ValueError("zeta must be >= 1")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class SolveStats:
    iterations: int = 0
    mode_switches: int = 0
    weight_updates: int = 0
    time_to_best: float = 0.0
    iteration_of_best: int = 0
    elapsed: float = 0.0
    stalled: bool = False
    kicks: int = 0


@dataclass
class SolveResult:
    status: str
    best_obj: float | None
    best_assignment: list[int] | None
    stats: SolveStats = field(default_factory=SolveStats)
    instance: str = ""
    sense: str = "min"
    variable_names: tuple[str, ...] = ()

    @property
    def solution(self) -> dict[str, int]:
        if self.best_assignment is None:
            return {}
        return dict(zip(self.variable_names, self.best_assignment))


class _Memo:
    """Per-step cache of operator output and scores; valid until the state changes."""

    def __init__(self):
        self.moves: dict = {}
        self.scores: dict[Move, ScoredMove] = {}

    def score(self, state: SolverState, mv: Move) -> ScoredMove:
        sm = self.scores.get(mv)
        if sm is None:
            sm = self.scores[mv] = score(state, mv)
        return sm


class OptimizationSpace:
    """Per-variable list of optimization operations allowed by the config.

    Entries are ``(EXP, i)``, ``(INC, i, x')`` and ``(FREE,)``; only the
    structure is fixed here, the moves themselves depend on the state.
    """

    def __init__(self, problem: Problem, config: SolverConfig):
        combos: dict[int, list[tuple]] = {}
        for j in sorted(problem.vf):
            ops: list[tuple] = []
            for i in problem.occurrence[j]:
                con = problem.constraints[i]
                if con.sense == "LE":
                    if not config.disable_exp:
                        ops.append((EXP, i))
                elif not config.disable_inc:
                    ops += [(INC, i, xp) for xp in problem.con_vars[i] if xp != j]
            if j in problem.free_vars and not config.disable_free:
                ops.append((FREE,))
            if ops:
                combos[j] = ops
        self.combos = combos
        self.variables = sorted(combos)
        self.literal = config.literal_both_theta

    def moves(self, state: SolverState, j: int, op: tuple, memo: _Memo) -> list[Move]:
        key = (j, op)
        cached = memo.moves.get(key)
        if cached is not None:
            return cached
        kind = op[0]
        if kind == EXP:
            mv = exp_move(state, op[1], j)
        elif kind == INC:
            mv = inc_move(state, op[1], j, op[2], literal=self.literal)
        else:
            mv = free_move(state, j)
        out = [mv] if mv is not None else []
        memo.moves[key] = out
        return out

    def any_move(self, state: SolverState, memo: _Memo) -> bool:
        return any(self.moves(state, j, op, memo)
                   for j in self.variables for op in self.combos[j])


def _sat_sampler(state: SolverState, memo: _Memo, constraint: int | None = None):
    rng = state.rng
    con_vars = state.problem.con_vars

    def draw():
        if constraint is None:
            viol = state.violated
            i = viol[rng.randrange(len(viol))]
        else:
            i = constraint
        vs = con_vars[i]
        j = vs[rng.randrange(len(vs))]
        key = (i, j)
        moves = memo.moves.get(key)
        if moves is None:
            moves = memo.moves[key] = sat_moves(state, i, j)
        if len(moves) > 1:
            # the candidates of one draw come in random order, so equal scores
            # are not always resolved toward the same root
            return rng.sample(moves, len(moves))
        return moves

    return draw


def satisfying_step(state: SolverState, config: SolverConfig) -> str:
    """One iteration of the satisfying mode.

    Returns ``"move"``, ``"weights"`` (weights updated, possibly plus a
    non-improving move) or ``"kick"`` when the state was perturbed because the
    chosen row has no satisfying move or the search is cycling.
    """
    assert state.violated, "satisfying mode needs a violated constraint"
    rng = state.rng
    if len(state.violated) < state.fewest_violated:
        state.fewest_violated = len(state.violated)
        state.since_progress = 0
    else:
        state.since_progress += 1
    if config.escape_stalls and state.since_progress >= STUCK_LIMIT:
        # no new low in the violated count for a long time: almost surely a cycle
        state.since_progress = 0
        c = state.violated[rng.randrange(len(state.violated))]
        if kick(state, config, state.problem.con_vars[c]):
            return "kick"

    memo = _Memo()
    best = bms_select(state, _sat_sampler(state, memo), config.t, True, memo.score)
    if best is not None:
        apply_move(state, best.move)
        return "move"
    update_weights(state)
    memo.scores.clear()
    for _ in range(max(1, state.problem.m)):
        c = state.violated[rng.randrange(len(state.violated))]
        best = bms_select(state, _sat_sampler(state, memo, c), config.t, False, memo.score)
        if best is not None:
            apply_move(state, best.move)
            return "weights"
        if config.escape_stalls:
            return "kick" if kick(state, config, state.problem.con_vars[c]) else "weights"
    return "weights"


def optimization_step(state: SolverState, config: SolverConfig, space: OptimizationSpace) -> str:
    """One iteration of the optimization mode.

    Returns ``"move"``, ``"weights"`` or ``"stalled"`` when no optimization
    operation exists anywhere (a fixed point of the operators).
    """
    assert not state.violated, "optimization mode needs a feasible assignment"
    state.fewest_violated = INF
    memo = _Memo()
    rng = state.rng
    variables = space.variables
    if not variables:
        # every operator disabled (or nothing to optimize): only weights change
        update_weights(state)
        return "weights"
    combos = space.combos

    def sample_all():
        j = variables[rng.randrange(len(variables))]
        ops = combos[j]
        return space.moves(state, j, ops[rng.randrange(len(ops))], memo)

    best = bms_select(state, sample_all, config.t, True, memo.score)
    if best is not None:
        apply_move(state, best.move)
        return "move"

    update_weights(state)
    memo.scores.clear()
    for _ in range(len(variables)):
        v = variables[rng.randrange(len(variables))]
        ops = combos[v]

        def sample_v():
            return space.moves(state, v, ops[rng.randrange(len(ops))], memo)

        best = bms_select(state, sample_v, config.t, False, memo.score)
        if best is not None:
            apply_move(state, best.move)
            return "weights"
    if not space.any_move(state, memo):
        return "stalled"
    return "weights"


def kick(state: SolverState, config: SolverConfig, pool) -> bool:
    """Move random variables of ``pool`` to random new values.

    Only used at fixed points of the operators and in satisfying-mode
    cycles.  One variable moves with probability 1/2, two with 1/4 and so on.  Returns
    False if nothing in ``pool`` can move.
    """
    rng = state.rng
    p = state.problem
    size = 1
    while size < len(pool) and rng.random() < 0.5:
        size += 1
    moved = False
    for j in rng.sample(pool, size) if pool else ():
        lb, ub, cur = p.lbs[j], p.ubs[j], state.alpha[j]
        if config.kick == "uniform" and lb != -INF and ub != INF:
            if ub == lb:
                continue
            v = rng.randint(int(lb), int(ub) - 1)
            v += v >= cur
        else:
            steps = [v for v in (cur - 1, cur + 1) if lb <= v <= ub]
            if not steps:
                continue
            v = steps[rng.randrange(len(steps))]
        apply_move(state, Move(KICK, j, v))
        moved = True
    if moved:
        state.kicks += 1
    return moved


def solve(problem: Problem, config: SolverConfig | None = None) -> SolveResult:
    """Run the local search until the time limit (or iteration cap) is reached."""
    config = config or SolverConfig()
    state = init_state(problem, config.seed, config.zeta)
    space = OptimizationSpace(problem, config)
    pool = sorted(set(problem.vf).union(*map(set, problem.con_vars)))
    stats = SolveStats()
    deadline = state.t0 + config.time_limit
    clock = time.perf_counter
    last_mode = None
    max_it = config.max_iterations
    while clock() < deadline and (max_it is None or state.iteration < max_it):
        mode = bool(state.violated)
        if last_mode is not None and mode != last_mode:
            stats.mode_switches += 1
        last_mode = mode
        if mode:
            outcome = satisfying_step(state, config)
        else:
            outcome = optimization_step(state, config, space)
        state.iteration += 1
        if outcome == "stalled":
            if not (config.escape_stalls and kick(state, config, pool)):
                stats.stalled = True

    stats.iterations = state.iteration
    stats.elapsed = clock() - state.t0
    stats.time_to_best = state.best_time
    stats.iteration_of_best = state.best_iteration
    stats.kicks = state.kicks
    stats.weight_updates = state.weight_updates
    logger.debug("%s: %d iterations, best %s", problem.name, stats.iterations, state.best_obj)
    return _result(problem, state, stats)


def _result(problem: Problem, state: SolverState, stats: SolveStats) -> SolveResult:
    names = tuple(v.name for v in problem.variables)
    common = dict(stats=stats, instance=problem.name, sense=problem.sense_original,
                  variable_names=names)
    if state.best_alpha is None:
        return SolveResult(NA, None, None, **common)
    if max_violation(problem, state.best_alpha)[0] > 0:
        raise AssertionError("recorded best assignment fails the feasibility check")
    obj = problem.objective.evaluate(state.best_alpha)
    if problem.sense_original == "max":
        obj = -obj
    return SolveResult(FEASIBLE, obj + 0.0, list(state.best_alpha), **common)
