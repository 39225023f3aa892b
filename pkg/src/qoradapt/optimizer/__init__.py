"""MILP formulation, LP engine and branch-and-bound."""
from .bnb import SolveBudget, SolveResult, TrajectoryPoint, branch_and_bound, relative_gap, round_and_repair
from .lp import LinearProgram, LPResult
from .problem import PreconditionError, ProblemMeta, build_problem, decode, encode
from .simplex import Basis, BoundedSimplex, solve_lp
