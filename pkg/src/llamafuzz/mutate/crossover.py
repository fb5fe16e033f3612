"""Single-point crossover that never separates a storage writer from its reader."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from ..corpus import Origin, Seed


@dataclass(frozen=True)
class CrossoverPlan:
    parent_a: str
    parent_b: str
    cut_a: int
    cut_b: int
    preserved: tuple[tuple[int, int], ...]  # RAW links of parent A kept intact


def legal_cuts(length: int, links: Sequence[tuple[int, int]]) -> list[int]:
    """Interior cut positions c (prefix = txs[:c]) that split no RAW link.

    A link (j, k) is split when j < c <= k: the writer would stay in the
    prefix while the reader moved to the other child.
    """
    return [c for c in range(1, length) if not any(j < c <= k for j, k in links)]


def plan_crossover(a: Seed, b: Seed, rng: random.Random) -> CrossoverPlan:
    cuts_a = legal_cuts(len(a), a.raw_links)
    cuts_b = legal_cuts(len(b), b.raw_links)
    ca = rng.choice(cuts_a) if cuts_a else len(a)
    cb = rng.choice(cuts_b) if cuts_b else len(b)
    return CrossoverPlan(a.id, b.id, ca, cb, tuple(a.raw_links))


def crossover_raw_aware(a: Seed, b: Seed, rng: random.Random, seq_len_max: int = 8) -> tuple[Seed, Seed]:
    cuts_a = legal_cuts(len(a), a.raw_links)
    cuts_b = legal_cuts(len(b), b.raw_links)
    if a.id == b.id or (not cuts_a and not cuts_b):
        return (Seed(a.txs[:seq_len_max], Origin.CROSSOVER, raw_links=_clip(a.raw_links, seq_len_max)),
                Seed(b.txs[:seq_len_max], Origin.CROSSOVER, raw_links=_clip(b.raw_links, seq_len_max)))
    plan = plan_crossover(a, b, rng)
    ca, cb = plan.cut_a, plan.cut_b
    child_a = (a.txs[:ca] + b.txs[cb:])[:seq_len_max]
    child_b = (b.txs[:cb] + a.txs[ca:])[:seq_len_max]
    return Seed(child_a, Origin.CROSSOVER), Seed(child_b, Origin.CROSSOVER)


def _clip(links: Sequence[tuple[int, int]], n: int) -> tuple[tuple[int, int], ...]:
    return tuple((j, k) for j, k in links if k < n)
