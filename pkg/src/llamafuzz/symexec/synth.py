"""Branch flipping, seed synthesis and the bounded exploration driver."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

from ..bundle import Bundle
from ..corpus import Origin, Seed, execute_seed
from ..feedback import GlobalCoverage, trace_edges
from .concolic import PathConstraint, collect_constraints
from .expr import SymbolicBudgetExceeded, symbols
from .solver import BuiltinSolver, Constraint, Solver, SolveResult, Status

log = logging.getLogger(__name__)

MAX_FLIPS = 20
TIME_BUDGET_S = 5.0
NODE_BUDGET = 100_000


class ValidationFailed(Exception):
    pass


def flip_query(pc: PathConstraint, target_index: int) -> list[Constraint]:
    """Prefix constraints sharing symbols with the target, plus the negated target.

    Prefix constraints over disjoint symbols keep their current values and so
    stay satisfied; leaving them out keeps the query small.
    """
    target = pc.branches[target_index]
    query: list[Constraint] = [(target.predicate, not target.taken)]
    live = set(symbols(target.predicate))
    prefix = [(b.predicate, b.taken, symbols(b.predicate))
              for b in pc.branches[:target_index] if b.predicate is not None]
    picked = [False] * len(prefix)
    changed = True
    while changed:
        changed = False
        for i, (_, _, syms) in enumerate(prefix):
            if not picked[i] and syms & live:
                picked[i] = True
                live |= syms
                changed = True
    query[:0] = [(p, taken) for (p, taken, _), keep in zip(prefix, picked) if keep]
    return query


def flip_and_solve(pc: PathConstraint, target_index: int, solver_budget_ms: int = 5000,
                   solver: Solver | None = None) -> SolveResult:
    target = pc.branches[target_index]
    if target.predicate is None:
        return SolveResult(Status.UNKNOWN)  # the condition is concrete with respect to our inputs
    solver = solver or BuiltinSolver()
    return solver.solve(flip_query(pc, target_index), pc.values, pc.domains, solver_budget_ms)


def _apply(seed: Seed, bundle: Bundle, assignment: dict[str, int]) -> Seed:
    txs = list(seed.txs)
    for name, v in assignment.items():
        head, _, leaf = name.partition(".")
        t = int(head[2:])
        if t >= len(txs):
            continue
        tx = txs[t]
        if leaf == "timestamp":
            tx = tx.with_env(timestamp=v)
        elif leaf == "number":
            tx = tx.with_env(block_number=v)
        elif leaf == "callvalue":
            tx = replace(tx, value=v)
        elif leaf.startswith("arg"):
            i = int(leaf[3:])
            typ = bundle.function(tx.function).inputs[i]
            if typ.kind == "bool":
                val = bool(v)
            elif typ.kind == "int":
                val = v - (1 << 256) if v >> 255 else v
            else:
                val = v
            args = list(tx.args)
            args[i] = val
            tx = replace(tx, args=tuple(args))
        txs[t] = tx
    return Seed(tuple(txs), Origin.SYMBOLIC)


def synthesize_seed(bundle: Bundle, base_seed: Seed, assignment: dict[str, int],
                    expect_edge: tuple[int, int, bool] | None = None) -> Seed:
    """Clone ``base_seed`` with the assigned inputs; optionally confirm an edge is now covered."""
    changed = {k: v for k, v in assignment.items() if _current(base_seed, bundle, k) != v}
    seed = _apply(base_seed, bundle, changed)
    if expect_edge is not None:
        edges = trace_edges(execute_seed(bundle, seed).traces)
        if expect_edge not in edges:
            raise ValidationFailed(f"edge {expect_edge} not covered by synthesized seed")
    return seed


def _current(seed: Seed, bundle: Bundle, name: str) -> int | None:
    head, _, leaf = name.partition(".")
    t = int(head[2:])
    if t >= len(seed.txs):
        return None
    tx = seed.txs[t]
    if leaf == "timestamp":
        return tx.env.timestamp
    if leaf == "number":
        return tx.env.block_number
    if leaf == "callvalue":
        return tx.value
    v = tx.args[int(leaf[3:])]
    return int(v) % (1 << 256)


@dataclass
class ExploreResult:
    seeds: list[Seed] = field(default_factory=list)
    attempts: int = 0
    sat: int = 0
    unsat: int = 0
    unknown: int = 0
    validation_failures: int = 0
    budget_exceeded: bool = False


def explore(bundle: Bundle, seed: Seed, coverage: GlobalCoverage, solver: Solver | None = None,
            max_flips: int = MAX_FLIPS, time_budget_s: float = TIME_BUDGET_S,
            node_budget: int = NODE_BUDGET, failed: set | None = None,
            tried: set | None = None) -> ExploreResult:
    """Flip uncovered branches adjacent to ``seed``'s path, deepest first.

    ``failed`` memoises edges that could not be reached so later invocations
    skip them; ``tried`` holds edges already attempted in the current round
    (e.g. from another seed). Both are updated in place.
    """
    res = ExploreResult()
    deadline = time.monotonic() + time_budget_s
    failed = failed if failed is not None else set()
    try:
        pc = collect_constraints(bundle, seed, node_budget)
    except SymbolicBudgetExceeded:
        res.budget_exceeded = True
        return res
    tried = tried if tried is not None else set()
    for i in range(len(pc.branches) - 1, -1, -1):
        if res.attempts >= max_flips or time.monotonic() >= deadline:
            break
        b = pc.branches[i]
        edge = b.flipped_edge
        if b.predicate is None or edge in coverage.branch_edges or edge in failed or edge in tried:
            continue
        tried.add(edge)
        res.attempts += 1
        remaining_ms = max(1, int((deadline - time.monotonic()) * 1000))
        out = flip_and_solve(pc, i, remaining_ms, solver)
        if out.status is Status.SAT:
            res.sat += 1
            try:
                res.seeds.append(synthesize_seed(bundle, seed, out.assignment, edge))
                continue
            except ValidationFailed:
                res.validation_failures += 1
        elif out.status is Status.UNSAT:
            res.unsat += 1
        else:
            res.unknown += 1
        failed.add(edge)
    return res
