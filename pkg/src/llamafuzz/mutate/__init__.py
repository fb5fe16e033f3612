"""Mutation operators, adaptive operator scheduling and RAW-aware crossover."""

from .crossover import CrossoverPlan, crossover_raw_aware, legal_cuts, plan_crossover
from .operators import OPERATORS, InapplicableOperator, Operator, apply, mutate_value
from .scheduler import (
    P_MAX,
    P_MIN,
    OperatorScheduler,
    credit,
    mutate_with,
    sample_operators,
    update_probabilities,
)

__all__ = [
    "OPERATORS", "P_MAX", "P_MIN", "CrossoverPlan", "InapplicableOperator", "Operator",
    "OperatorScheduler", "apply", "credit", "crossover_raw_aware", "legal_cuts", "mutate_value",
    "mutate_with", "plan_crossover", "sample_operators", "update_probabilities",
]
