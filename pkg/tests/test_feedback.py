"""Coverage deltas, commit semantics, RAW pairs and stagnation detection."""

from __future__ import annotations

import random

from hypothesis import given, settings, strategies as st

from llamafuzz.corpus import execute_seed
from llamafuzz.feedback import (
    FitnessRecord,
    GlobalCoverage,
    StagnationDetector,
    Trigger,
    commit,
    deltas,
    raw_pairs,
)
from llamafuzz.vm import ExecutionTrace
from llamafuzz.vm.trace import StorageAccess

from conftest import random_toy_seed, seq

def brute_force_raw(traces) -> set:
    """O(n^2) enumeration: successful writer j, any later reader k, shared slot."""
    out = set()
    for j, tj in enumerate(traces):
        if tj.exception is not None:
            continue
        written = {(w.address, w.slot) for w in tj.storage_writes}
        for k in range(j + 1, len(traces)):
            for r in traces[k].storage_reads:
                if (r.address, r.slot) in written:
                    out.add((r.address, r.slot, tj.selector, traces[k].selector))
    return out


def synthetic_trace(sites: int, edges: int, selector: bytes, writes=(), reads=()) -> ExecutionTrace:
    t = ExecutionTrace(to=1, selector=selector)
    t.instr_sites = [(1, pc, 0) for pc in range(sites)]
    t.branch_edges = [(1, 1000 + pc, True) for pc in range(edges)]
    t.storage_writes = [StorageAccess(i, 1, s, 0, 0) for i, s in enumerate(writes)]
    t.storage_reads = [StorageAccess(i, 1, s, 0, 0) for i, s in enumerate(reads)]
    return t


def test_fit_is_sum_of_deltas():
    a = synthetic_trace(12, 3, b"\x01", writes=[0])
    b = synthetic_trace(12, 3, b"\x02", reads=[0])
    rec = deltas([a, b], GlobalCoverage())
    assert rec == FitnessRecord(3, 12, 1)
    assert rec.fit == 16


def test_replay_after_commit_has_no_novelty(storage_toy):
    run = execute_seed(storage_toy, seq(("setA(uint256)", [5]), ("getA()", [])))
    g = GlobalCoverage()
    assert deltas(run.traces, g).fit > 0
    commit(g, run.traces)
    assert deltas(run.traces, g).fit == 0


def test_store_then_load_is_one_raw_pair(storage_toy):
    run = execute_seed(storage_toy, seq(("setA(uint256)", [7]), ("getA()", [])))
    assert deltas(run.traces, GlobalCoverage()).delta_raw == 1
    r = run.traces[1].storage_reads
    assert [(x.slot, x.value) for x in r] == [(0, 7)]


def test_deltas_are_read_only(storage_toy):
    run = execute_seed(storage_toy, seq(("setA(uint256)", [7])))
    g = GlobalCoverage()
    deltas(run.traces, g)
    assert g.totals() == (0, 0, 0)


def test_commit_idempotent_commutative_identity(storage_toy):
    ta = execute_seed(storage_toy, seq(("setA(uint256)", [1]), ("getB()", []))).traces
    tb = execute_seed(storage_toy, seq(("swap()", []), ("fail()", []))).traces
    once, twice = GlobalCoverage(), GlobalCoverage()
    commit(once, ta)
    commit(twice, ta)
    commit(twice, ta)
    assert once == twice
    ab, ba = GlobalCoverage(), GlobalCoverage()
    commit(ab, ta)
    commit(ab, tb)
    commit(ba, tb)
    commit(ba, ta)
    assert ab == ba
    before = once.copy()
    commit(once, [])
    assert once == before


def test_reverted_writer_creates_no_pair(storage_toy):
    run = execute_seed(storage_toy, seq(("fail()", []), ("getA()", [])))
    assert raw_pairs(run.traces) == set()


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_raw_pairs_match_brute_force(storage_toy, n):
    traces = execute_seed(storage_toy, random_toy_seed(random.Random(n))).traces
    assert raw_pairs(traces) == brute_force_raw(traces)


# -- stagnation -------------------------------------------------------------------------

def feed(totals, det=None):
    det = det or StagnationDetector()
    return [det.check(t) for t in totals]


def test_flat_window_fires_symbolic():
    assert feed([100] * 6) == [None] * 5 + [Trigger.SYMBOLIC]


def test_steady_growth_never_fires():
    totals = [round(100 * 1.02**i) for i in range(30)]
    assert all(x is None for x in feed(totals))


def test_reinit_after_ten_flat_generations():
    out = feed([100] * 11)
    assert out[5] is Trigger.SYMBOLIC
    assert out[10] is Trigger.REINIT
    assert [i for i, x in enumerate(out) if x] == [5, 10]


def test_windows_restart_after_reinit():
    out = feed([100] * 21)
    assert [(i, x) for i, x in enumerate(out) if x] == [
        (5, Trigger.SYMBOLIC), (10, Trigger.REINIT), (15, Trigger.SYMBOLIC), (20, Trigger.REINIT)]


def test_small_relative_growth_counts_as_flat():
    # +0.5% over five generations is below the 1% relative threshold.
    assert feed([1000, 1001, 1002, 1003, 1004, 1005])[-1] is Trigger.SYMBOLIC


def test_growth_defers_reinit():
    out = feed([100] * 9 + [101] + [101] * 9)
    assert Trigger.REINIT not in out


def test_reset_clears_history():
    det = StagnationDetector()
    feed([100] * 5, det)
    det.reset()
    assert feed([100] * 5, det) == [None] * 5
