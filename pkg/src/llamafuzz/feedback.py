"""Campaign-wide coverage accounting, fitness deltas and stagnation detection."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .vm.trace import ExecutionTrace

Site = tuple[int, int]  # (code address, pc)
Edge = tuple[int, int, bool]  # (code address, pc, taken)
RawPair = tuple[int, int, bytes, bytes]  # (address, slot, writer selector, reader selector)


@dataclass(frozen=True)
class FitnessRecord:
    delta_branch: int = 0
    delta_inst: int = 0
    delta_raw: int = 0

    @property
    def fit(self) -> int:
        return self.delta_branch + self.delta_inst + self.delta_raw

    @property
    def gain(self) -> int:
        """Coverage gain credited to mutation operators (branches + instructions)."""
        return self.delta_branch + self.delta_inst


@dataclass
class GlobalCoverage:
    instr_sites: set[Site] = field(default_factory=set)
    branch_edges: set[Edge] = field(default_factory=set)
    raw_pairs: set[RawPair] = field(default_factory=set)

    def copy(self) -> "GlobalCoverage":
        return GlobalCoverage(set(self.instr_sites), set(self.branch_edges), set(self.raw_pairs))

    def merge(self, other: "GlobalCoverage") -> "GlobalCoverage":
        return GlobalCoverage(self.instr_sites | other.instr_sites,
                              self.branch_edges | other.branch_edges,
                              self.raw_pairs | other.raw_pairs)

    def totals(self) -> tuple[int, int, int]:
        return len(self.instr_sites), len(self.branch_edges), len(self.raw_pairs)


def trace_sites(traces: Iterable[ExecutionTrace]) -> set[Site]:
    return {(a, pc) for t in traces for a, pc, _ in t.instr_sites}


def trace_edges(traces: Iterable[ExecutionTrace]) -> set[Edge]:
    return {e for t in traces for e in t.branch_edges}


def raw_dependencies(traces: Sequence[ExecutionTrace]) -> list[tuple[int, int, int, int]]:
    """Transaction-level RAW links as ``(writer index, reader index, address, slot)``.

    A link exists when a successful transaction j writes a slot that a later
    transaction k reads. Reads by failed transactions still count: the
    dependency was exercised even if the reader reverted afterwards.
    """
    written: dict[tuple[int, int], list[int]] = {}
    links: list[tuple[int, int, int, int]] = []
    seen = set()
    for k, tr in enumerate(traces):
        for r in tr.storage_reads:
            for j in written.get((r.address, r.slot), ()):
                key = (j, k, r.address, r.slot)
                if key not in seen:
                    seen.add(key)
                    links.append(key)
        if tr.exception is None:
            for w in tr.storage_writes:
                writers = written.setdefault((w.address, w.slot), [])
                if not writers or writers[-1] != k:
                    writers.append(k)
    return links


def raw_pairs(traces: Sequence[ExecutionTrace]) -> set[RawPair]:
    return {(a, s, traces[j].selector, traces[k].selector)
            for j, k, a, s in raw_dependencies(traces)}


def deltas(traces: Sequence[ExecutionTrace], global_cov: GlobalCoverage) -> FitnessRecord:
    """Novelty of a seed's traces against the campaign-wide sets (read-only)."""
    return FitnessRecord(
        delta_branch=len(trace_edges(traces) - global_cov.branch_edges),
        delta_inst=len(trace_sites(traces) - global_cov.instr_sites),
        delta_raw=len(raw_pairs(traces) - global_cov.raw_pairs),
    )


def commit(global_cov: GlobalCoverage, traces: Sequence[ExecutionTrace]) -> None:
    global_cov.instr_sites |= trace_sites(traces)
    global_cov.branch_edges |= trace_edges(traces)
    global_cov.raw_pairs |= raw_pairs(traces)


class Trigger(str, enum.Enum):
    SYMBOLIC = "TriggerSymbolic"
    REINIT = "TriggerReinit"


@dataclass
class StagnationDetector:
    """Watches per-generation branch totals for flat coverage.

    Symbolic execution fires when branch coverage grew by less than
    ``sym_rel_growth`` (relative) over the last ``sym_window`` generations;
    reinitialisation fires after ``reinit_window`` generations without any
    growth. Each window restarts from the generation at which it fired.
    """

    sym_window: int = 5
    sym_rel_growth: float = 0.01
    reinit_window: int = 10
    _sym: deque = field(default_factory=deque, repr=False)
    _reinit: deque = field(default_factory=deque, repr=False)

    def check(self, branch_total: int) -> Trigger | None:
        self._sym.append(branch_total)
        self._reinit.append(branch_total)
        while len(self._sym) > self.sym_window + 1:
            self._sym.popleft()
        while len(self._reinit) > self.reinit_window + 1:
            self._reinit.popleft()

        reinit = len(self._reinit) > self.reinit_window and self._reinit[-1] - self._reinit[0] <= 0
        if reinit:
            self._restart(self._reinit)
            self._restart(self._sym)
            return Trigger.REINIT
        if len(self._sym) > self.sym_window:
            base = self._sym[0]
            growth = branch_total - base
            rel = growth / base if base > 0 else (0.0 if growth == 0 else float("inf"))
            if rel < self.sym_rel_growth:
                self._restart(self._sym)
                return Trigger.SYMBOLIC
        return None

    @staticmethod
    def _restart(window: deque) -> None:
        last = window[-1]
        window.clear()
        window.append(last)

    def reset(self) -> None:
        self._sym.clear()
        self._reinit.clear()


def check_stagnation(detector: StagnationDetector, branch_total: int) -> Trigger | None:
    return detector.check(branch_total)
