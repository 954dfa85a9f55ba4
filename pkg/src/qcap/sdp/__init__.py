from .model import ConicForm, Expr, Problem, Variable, extract, inner, kron, realify, trace
from .solver import SolverError, SolverSolution, default_options, solve

__all__ = ["ConicForm", "Expr", "Problem", "Variable", "extract", "inner", "kron", "realify",
           "trace", "SolverError", "SolverSolution", "default_options", "solve"]
