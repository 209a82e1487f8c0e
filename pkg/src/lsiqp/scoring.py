"""Constraint/objective weights, move scores and best-from-multiple-selections."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable

if TYPE_CHECKING:
    from .evaluator import SolverState
    from .operators import Move

NOISE = 1e-12


@dataclass
class Weights:
    m: int
    zeta: int = 100
    w_con: list[int] = field(default_factory=list)
    w_obj: int = 1

    def __post_init__(self):
        if self.zeta < 1:
            raise ValueError("zeta must be >= 1")
        if not self.w_con:
            self.w_con = [1] * self.m


@dataclass(frozen=True)
class ScoredMove:
    move: "Move"
    score: float

    @property
    def decreasing(self) -> bool:
        return self.score > 0


def penalty(state: "SolverState", i: int, activity: float, feasible_regime: bool | None = None) -> float:
    """Penalty of constraint ``i`` when its body evaluates to ``activity``.

    The regime follows the feasibility of the current assignment unless given.
    """
    if feasible_regime is None:
        feasible_regime = state.feasible
    v = state.violation_at(i, activity)
    if feasible_regime:
        return state.weights.w_con[i] * v
    return state.weights.w_con[i] if v > 0 else 0


def score(state: "SolverState", move: "Move") -> ScoredMove:
    acts, new_obj = state.probe(move.changes)
    w = state.weights.w_con
    viol = state.violation_at
    cur = state.activity
    con_score = 0.0
    if state.feasible:
        for i, a in acts.items():
            con_score -= w[i] * viol(i, a)
    else:
        for i, a in acts.items():
            before = viol(i, cur[i]) > 0
            after = viol(i, a) > 0
            if before != after:
                con_score += w[i] if before else -w[i]
    delta = state.obj_value - new_obj
    if abs(delta) < NOISE:
        delta = 0.0
    w_obj = state.weights.w_obj
    if state.feasible:
        obj_score = w_obj * delta
    else:
        obj_score = w_obj * ((delta > 0) - (delta < 0))
    return ScoredMove(move, con_score + obj_score)


def update_weights(state: "SolverState") -> None:
    wt = state.weights
    state.weight_updates += 1
    for i in state.violated:
        wt.w_con[i] += 1
    if state.obj_value > state.best_obj and wt.w_obj < wt.zeta:
        wt.w_obj += 1


def bms_select(state: "SolverState", sampler: Callable[[], Iterable["Move"]], t: int,
               require_decreasing: bool, scorer=score) -> ScoredMove | None:
    """Draw ``t`` samples and keep the highest score (first drawn wins ties).

    ``sampler`` returns the moves of one random draw (possibly none).
    ``scorer`` may be a memoized variant of :func:`score`.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    best: ScoredMove | None = None
    for _ in range(t):
        for mv in sampler():
            sm = scorer(state, mv)
            if require_decreasing and sm.score <= 0:
                continue
            if best is None or sm.score > best.score:
                best = sm
    return best
