"""Search state with incrementally maintained constraint activities."""

from __future__ import annotations

import math
import random
import time
from typing import Iterable

from .model import EQ, INF, Problem, clamp, feas_tol
from .scoring import Weights

RECOMPUTE_EVERY = 1_000_000


class SolverState:
    """Mutable search state over an immutable :class:`Problem`.

    ``activity[i]`` is the body value of constraint ``i`` at ``alpha``; the
    violated rows are kept in ``violated`` (a list, for O(1) uniform sampling)
    with positions in ``_vpos``.
    """

    def __init__(self, problem: Problem, seed: int = 1, zeta: int = 100):
        self.problem = problem
        self.rng = random.Random(seed)
        self.weights = Weights(problem.m, zeta)
        self.alpha = [clamp(0, v.lb, v.ub) for v in problem.variables]
        self.rhs = [c.rhs for c in problem.constraints]
        self.is_eq = [c.sense == EQ for c in problem.constraints]
        self.tol = [feas_tol(c.rhs) for c in problem.constraints]
        self.iteration = 0
        self.moves_applied = 0
        self.kicks = 0
        self.weight_updates = 0
        # progress record of the current infeasible stretch
        self.fewest_violated = INF
        self.since_progress = 0
        self.t0 = time.perf_counter()
        self.best_obj = INF
        self.best_alpha: list[int] | None = None
        self.best_time = 0.0
        self.best_iteration = 0
        self.recompute()
        self._update_best()

    # -- bookkeeping ---------------------------------------------------------

    def recompute(self) -> None:
        """Rebuild activities, the violated set and the objective from scratch."""
        p = self.problem
        self.activity = [c.body.evaluate(self.alpha) for c in p.constraints]
        self.obj_value = p.objective.evaluate(self.alpha)
        self.violated: list[int] = []
        self._vpos: dict[int, int] = {}
        for i in range(p.m):
            if self.violation_at(i, self.activity[i]) > 0:
                self._add_violated(i)

    def _add_violated(self, i: int) -> None:
        self._vpos[i] = len(self.violated)
        self.violated.append(i)

    def _remove_violated(self, i: int) -> None:
        pos = self._vpos.pop(i)
        last = self.violated.pop()
        if last != i:
            self.violated[pos] = last
            self._vpos[last] = pos

    def _update_best(self) -> bool:
        if not self.violated and self.obj_value < self.best_obj:
            self.best_obj = self.obj_value
            self.best_alpha = list(self.alpha)
            self.best_time = time.perf_counter() - self.t0
            self.best_iteration = self.iteration
            return True
        return False

    @property
    def feasible(self) -> bool:
        return not self.violated

    # -- evaluation ----------------------------------------------------------

    def violation_at(self, i: int, activity: float) -> float:
        d = activity - self.rhs[i]
        v = abs(d) if self.is_eq[i] else (d if d > 0 else 0.0)
        return v if v > self.tol[i] else 0.0

    def con_view(self, i: int, j: int, values=None) -> tuple[float, float, float]:
        """``(A, H, I)`` of constraint ``i`` around ``x_j`` at the current state."""
        a, lin, adj = self.problem.con_terms[i][j]
        vals = self.alpha if values is None else values
        h = lin
        for k, c in adj:
            h += c * vals[k]
        x = self.alpha[j]
        return a, h, self.activity[i] - a * x * x - h * x

    def obj_view(self, j: int) -> tuple[float, float]:
        """``(W, K)`` of the objective around ``x_j`` (zeros if ``x_j`` is absent)."""
        sl = self.problem.obj_slices[j]
        if sl is None:
            return 0.0, 0.0
        w, lin, adj = sl
        vals = self.alpha
        k_ = lin
        for k, c in adj:
            k_ += c * vals[k]
        return w, k_

    def probe(self, changes: Iterable[tuple[int, int]]) -> tuple[dict[int, float], float]:
        """Activities of touched constraints and the objective after ``changes``.

        Changes are applied in order, each against the values left by the
        previous one.  Nothing is committed.
        """
        p = self.problem
        vals = self.alpha
        act = self.activity
        overlay: dict[int, int] = {}
        acts: dict[int, float] = {}
        obj = self.obj_value
        for j, new in changes:
            old = overlay.get(j, vals[j])
            if new == old:
                continue
            d = new - old
            dsq = new * new - old * old
            for i, a, lin, adj in p.con_slices[j]:
                h = lin
                for k, c in adj:
                    h += c * overlay.get(k, vals[k])
                acts[i] = acts.get(i, act[i]) + h * d + a * dsq
            sl = p.obj_slices[j]
            if sl is not None:
                w, lin, adj = sl
                h = lin
                for k, c in adj:
                    h += c * overlay.get(k, vals[k])
                obj += h * d + w * dsq
            overlay[j] = new
        return acts, obj

    # -- mutation ------------------------------------------------------------

    def set_value(self, j: int, new: int) -> None:
        p = self.problem
        vals = self.alpha
        old = vals[j]
        if new == old:
            return
        d = new - old
        dsq = new * new - old * old
        act = self.activity
        vpos = self._vpos
        for i, a, lin, adj in p.con_slices[j]:
            h = lin
            for k, c in adj:
                h += c * vals[k]
            act[i] += h * d + a * dsq
            bad = self.violation_at(i, act[i]) > 0
            if bad and i not in vpos:
                self._add_violated(i)
            elif not bad and i in vpos:
                self._remove_violated(i)
        sl = p.obj_slices[j]
        if sl is not None:
            w, lin, adj = sl
            h = lin
            for k, c in adj:
                h += c * vals[k]
            self.obj_value += h * d + w * dsq
        vals[j] = new


def init_state(problem: Problem, seed: int = 1, zeta: int = 100) -> SolverState:
    return SolverState(problem, seed, zeta)


def violation(state: SolverState, i: int) -> float:
    """Violation of constraint ``i`` at the current assignment (0 within tolerance)."""
    return state.violation_at(i, state.activity[i])


def apply_move(state: SolverState, move) -> SolverState:
    """Commit ``move``; the best record is updated on strict improvement."""
    p = state.problem
    changes = move.changes
    for j, v in changes:
        if not p.lbs[j] <= v <= p.ubs[j]:
            raise ValueError(f"value {v} for variable {p.variables[j].name!r} is outside "
                             f"[{p.lbs[j]}, {p.ubs[j]}]")
    for j, v in changes:
        state.set_value(j, v)
    state.moves_applied += 1
    if state.moves_applied % RECOMPUTE_EVERY == 0:
        state.recompute()
    state._update_best()
    return state


def consistency_error(state: SolverState) -> float:
    """Largest relative gap between maintained and recomputed values (for tests)."""
    p = state.problem
    worst = 0.0
    for i, c in enumerate(p.constraints):
        ref = c.body.evaluate(state.alpha)
        worst = max(worst, abs(state.activity[i] - ref) / (1 + abs(ref)))
    ref = p.objective.evaluate(state.alpha)
    worst = max(worst, abs(state.obj_value - ref) / (1 + abs(ref)))
    if sorted(state.violated) != [i for i, c in enumerate(p.constraints)
                                  if state.violation_at(i, c.body.evaluate(state.alpha)) > 0]:
        return math.inf
    return worst
