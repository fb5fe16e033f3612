"""Selective concolic execution used when coverage stagnates."""

from .concolic import Branch, PathConstraint, collect_constraints, symbolic_arguments
from .expr import Builder, SymbolicBudgetExceeded, const, evaluate, render, sym
from .smtlib import SmtSolver, SolverUnavailable, to_smtlib
from .solver import BuiltinSolver, SolveResult, Solver, Status
from .synth import ExploreResult, ValidationFailed, explore, flip_and_solve, flip_query, synthesize_seed

__all__ = [
    "Branch", "Builder", "BuiltinSolver", "ExploreResult", "PathConstraint", "SmtSolver",
    "SolveResult", "Solver", "SolverUnavailable", "Status", "SymbolicBudgetExceeded",
    "ValidationFailed", "collect_constraints", "const", "evaluate", "explore", "flip_and_solve",
    "flip_query", "render", "sym", "symbolic_arguments", "synthesize_seed", "to_smtlib",
]
