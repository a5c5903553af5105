"""Dense primal-dual interior-point solver for small complex SDPs and LPs."""

from .ipm import Iterate, IpmResult, solve_standard
from .problem import ConicProblem, ConicSolution, Constraint, KktResiduals, Status, compile_problem
from .solver import DEFAULT_TOL, LpResult, solve, solve_feasibility, solve_lp

__all__ = [
    "ConicProblem",
    "ConicSolution",
    "Constraint",
    "KktResiduals",
    "Status",
    "Iterate",
    "IpmResult",
    "LpResult",
    "DEFAULT_TOL",
    "compile_problem",
    "solve",
    "solve_feasibility",
    "solve_lp",
    "solve_standard",
]
