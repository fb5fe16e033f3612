"""Adaptive operator scheduling with proportional credit assignment.

Children credit the operators that produced them with an equal share of
their coverage gain. Once per generation the accumulated credit becomes a
new sampling distribution: fitness shares plus Gaussian noise, clamped to
[p_min, p_max] and renormalised; credit then decays geometrically.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..bundle import Bundle
from ..corpus import Origin, Seed
from .operators import OPERATORS, InapplicableOperator, Operator, apply

P_MIN = 0.05
P_MAX = 0.95
MAX_RESAMPLES = 5


@dataclass
class OperatorScheduler:
    operators: tuple[Operator, ...] = OPERATORS
    sigma: float = 0.05
    decay: float = 0.9
    fit: dict[Operator, float] = field(default_factory=dict)
    p: dict[Operator, float] = field(default_factory=dict)
    last_clamped: dict[Operator, float] = field(default_factory=dict, repr=False)
    uniform_only: bool = False  # ablation: never adapt

    def __post_init__(self) -> None:
        m = len(self.operators)
        for op in self.operators:
            self.fit.setdefault(op, 0.0)
            self.p.setdefault(op, 1.0 / m)

    def sample(self, rng: random.Random, size: int | None = None) -> list[Operator]:
        """Draw |J| uniformly from {1, 2, 3} (unless ``size`` is given), then
        members without replacement in proportion to ``p``."""
        size = rng.choice((1, 2, 3)) if size is None else size
        pool = list(self.operators)
        weights = [self.p[op] for op in pool]
        chosen = []
        for _ in range(min(size, len(pool))):
            i = _weighted_index(rng, weights)
            chosen.append(pool.pop(i))
            weights.pop(i)
        return chosen

    def credit(self, ops: Sequence[Operator], delta_branch: int, delta_inst: int) -> None:
        if not ops:
            return
        share = (delta_branch + delta_inst) / len(ops)
        for op in ops:
            self.fit[op] += share

    def update(self, rng: random.Random) -> None:
        m = len(self.operators)
        if self.uniform_only:
            self.p = {op: 1.0 / m for op in self.operators}
            return
        total = sum(self.fit.values())
        if total > 0:
            raw = {op: self.fit[op] / total + (rng.gauss(0.0, self.sigma) if self.sigma > 0 else 0.0)
                   for op in self.operators}
        else:
            raw = {op: 1.0 / m for op in self.operators}
        clamped = {op: max(P_MIN, min(P_MAX, v)) for op, v in raw.items()}
        s = sum(clamped.values())
        self.last_clamped = clamped
        self.p = {op: v / s for op, v in clamped.items()}
        for op in self.operators:
            self.fit[op] *= self.decay

    def snapshot(self) -> list[tuple[str, float, float]]:
        return [(op.value, self.fit[op], self.p[op]) for op in self.operators]


def _weighted_index(rng: random.Random, weights: Sequence[float]) -> int:
    total = sum(weights)
    x = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if x < acc:
            return i
    return len(weights) - 1


def sample_operators(scheduler: OperatorScheduler, rng: random.Random) -> list[Operator]:
    return scheduler.sample(rng)


def credit(scheduler: OperatorScheduler, ops: Sequence[Operator], delta_branch: int, delta_inst: int) -> None:
    scheduler.credit(ops, delta_branch, delta_inst)


def update_probabilities(scheduler: OperatorScheduler, rng: random.Random) -> None:
    scheduler.update(rng)


def mutate_with(ops: Sequence[Operator], seed: Seed, bundle: Bundle, rng: random.Random,
                resample: Callable[[], Operator] | None = None) -> tuple[Seed, list[Operator]]:
    """Apply a stack of operators; returns the child and the operators actually used.

    An inapplicable operator is replaced by a freshly sampled one (up to
    ``MAX_RESAMPLES`` tries); if none applies the step is skipped. When no
    operator could be applied at all the child is a clone of ``seed``.
    """
    child = seed
    used: list[Operator] = []
    for op in ops:
        candidate = op
        for _ in range(MAX_RESAMPLES + 1):
            if candidate not in used:
                try:
                    child = apply(candidate, child, bundle, rng)
                    used.append(candidate)
                    break
                except InapplicableOperator:
                    pass
            if resample is None:
                break
            candidate = resample()
    if not used:
        return Seed(seed.txs, Origin.MUTATION), []
    return child, used
