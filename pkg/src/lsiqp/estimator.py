"""scikit-learn style wrapper around :func:`lsiqp.search.solve`.

There is no training data here: ``fit`` takes a problem (or a path to one)
and "fitting" means searching for a good assignment.
"""

from __future__ import annotations

import os

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .model import Problem, normalize
from .parser import RawProblem, load_problem
from .search import FEASIBLE, SolverConfig, solve


def check_problem(problem) -> Problem:
    """Accept a :class:`Problem`, a parsed raw problem or a path; return a normalized problem."""
    if isinstance(problem, Problem):
        return problem
    if isinstance(problem, RawProblem):
        return normalize(problem)
    if isinstance(problem, (str, os.PathLike)):
        return load_problem(problem)
    raise TypeError(f"expected a Problem, RawProblem or path, got {type(problem).__name__}")


class IQPSolver(BaseEstimator):
    """Local-search solver with estimator-style parameters.

    After :meth:`fit`, ``status_``, ``objective_`` (original sense, ``None``
    when no feasible point was found), ``solution_`` (name -> value) and the
    full ``result_`` are available.
    """

    def __init__(self, time_limit: float = 10.0, seed: int = 1, bms_samples: int = 100,
                 obj_weight_cap: int = 100, disable_exp: bool = False, disable_inc: bool = False,
                 disable_free: bool = False, max_iterations: int | None = None):
        self.time_limit = time_limit
        self.seed = seed
        self.bms_samples = bms_samples
        self.obj_weight_cap = obj_weight_cap
        self.disable_exp = disable_exp
        self.disable_inc = disable_inc
        self.disable_free = disable_free
        self.max_iterations = max_iterations

    def _config(self) -> SolverConfig:
        return SolverConfig(time_limit=self.time_limit, seed=self.seed, t=self.bms_samples,
                            zeta=self.obj_weight_cap, disable_exp=self.disable_exp,
                            disable_inc=self.disable_inc, disable_free=self.disable_free,
                            max_iterations=self.max_iterations)

    def fit(self, problem, y=None):
        problem = check_problem(problem)
        result = solve(problem, self._config())
        self.problem_ = problem
        self.result_ = result
        self.status_ = result.status
        self.objective_ = result.best_obj
        self.solution_ = result.solution
        return self

    def score(self, problem=None, y=None) -> float:
        """Objective of the fitted solution (negated for minimization, so higher is better)."""
        check_is_fitted(self, "result_")
        if self.status_ != FEASIBLE:
            return float("-inf")
        return self.objective_ if self.problem_.sense_original == "max" else -self.objective_
