"""Mixed-integer linear modelling, simplex/branch-and-bound solving and LP-format export."""

from .model import BINARY, CONTINUOUS, Constraint, MilpModel, Variable
from .simplex import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, DenseSimplex,
                      LPResult, farkas_verify, lp_solve, solve_relaxation)
from .bnb import SolveResult, solve
