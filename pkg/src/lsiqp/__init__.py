"""Local search for integer quadratic programs with quadratic constraints."""

from .model import Problem, coeff_view, normalize
from .parser import ParseError, UnsupportedInstance, load_problem, parse_canonical, parse_qplib
from .search import SolveResult, SolverConfig, solve

__all__ = [
    "Problem", "coeff_view", "normalize",
    "ParseError", "UnsupportedInstance", "load_problem", "parse_canonical", "parse_qplib",
    "SolveResult", "SolverConfig", "solve",
    "IQPSolver", "check_problem",
]

__version__ = "0.1.0"


def __getattr__(name):
    # the estimator pulls in scikit-learn, so only import it on demand
    if name in ("IQPSolver", "check_problem"):
        from . import estimator
        return getattr(estimator, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
