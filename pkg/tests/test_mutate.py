"""Mutation operators, operator scheduling and RAW-aware crossover."""

from __future__ import annotations

import dataclasses
import random

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from llamafuzz.corpus import Seed, Transaction, TxEnv, execute_seed, raw_links_of
from llamafuzz.mutate import (
    OPERATORS,
    P_MAX,
    P_MIN,
    InapplicableOperator,
    Operator,
    OperatorScheduler,
    apply,
    crossover_raw_aware,
    legal_cuts,
    mutate_with,
    plan_crossover,
)

from conftest import make_bundle, random_toy_seed, seq

PLAIN = make_bundle("STOP", [("f", ["uint256"], "payable"), ("g", [], "nonpayable"),
                             ("h", ["address", "bool"], "nonpayable")])


def plain_seed(n: int = 3) -> Seed:
    return seq(*[("f(uint256)", [i]) if i % 2 == 0 else ("h(address,bool)", [0xB2, True]) for i in range(n)])


def changed_fields(a: Seed, b: Seed) -> list[tuple[int, str]]:
    out = []
    for i, (x, y) in enumerate(zip(a.txs, b.txs)):
        for f in ("function", "args", "sender", "value"):
            if getattr(x, f) != getattr(y, f):
                out.append((i, f))
        for f in dataclasses.fields(TxEnv):
            if getattr(x.env, f.name) != getattr(y.env, f.name):
                out.append((i, f"env.{f.name}"))
    return out


# -- sampling --------------------------------------------------------------------------

def test_uniform_singletons_pass_chi_square():
    sched = OperatorScheduler()
    rng = random.Random(1)
    counts = {op: 0 for op in OPERATORS}
    for _ in range(100_000):
        counts[sched.sample(rng, size=1)[0]] += 1
    assert chisquare(list(counts.values())).pvalue > 1e-3


def test_concentrated_distribution_dominates_singletons():
    leader = Operator.TIMESTAMP
    p = {op: (0.95 if op is leader else 0.05 / 9) for op in OPERATORS}
    sched = OperatorScheduler(p=p)
    rng = random.Random(2)
    hits = sum(sched.sample(rng, size=1) == [leader] for _ in range(20_000))
    assert hits / 20_000 >= 0.90


def test_sample_sizes_and_distinct_members():
    sched = OperatorScheduler()
    rng = random.Random(3)
    sizes = set()
    for _ in range(3000):
        j = sched.sample(rng)
        assert len(set(j)) == len(j)
        sizes.add(len(j))
    assert sizes == {1, 2, 3}


def test_sampling_is_deterministic():
    a = [OperatorScheduler().sample(r) for r in [random.Random(9)] for _ in range(50)]
    b = [OperatorScheduler().sample(r) for r in [random.Random(9)] for _ in range(50)]
    assert a == b


# -- credit and update -------------------------------------------------------------------

def test_credit_splits_gain_equally():
    s = OperatorScheduler()
    s.credit([Operator.ARGUMENTS, Operator.ACCOUNT], 3, 5)
    assert s.fit[Operator.ARGUMENTS] == s.fit[Operator.ACCOUNT] == 4.0
    assert sum(s.fit.values()) == 8.0


def test_zero_gain_leaves_fit_unchanged():
    s = OperatorScheduler()
    s.credit([Operator.GAS_LIMIT], 0, 0)
    assert s.fit[Operator.GAS_LIMIT] == 0.0


def test_credits_accumulate():
    s = OperatorScheduler()
    s.credit([Operator.BALANCE], 1, 1)
    s.credit([Operator.BALANCE, Operator.TIMESTAMP], 2, 0)
    assert s.fit[Operator.BALANCE] == 3.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(OPERATORS), min_size=1, max_size=3, unique=True),
       st.integers(0, 10**6), st.integers(0, 10**6))
def test_credit_conserves_total_gain(ops, db, di):
    s = OperatorScheduler()
    s.credit(ops, db, di)
    assert sum(s.fit.values()) == pytest.approx(db + di, rel=1e-12, abs=0)


def test_equal_fits_without_noise_give_uniform():
    s = OperatorScheduler(sigma=0.0)
    for op in OPERATORS:
        s.credit([op], 5, 0)
    s.update(random.Random(0))
    assert all(v == pytest.approx(0.1) for v in s.p.values())


def test_leader_clamped_before_normalisation():
    s = OperatorScheduler(sigma=0.0)
    s.fit = {op: (99.0 if op is Operator.ARGUMENTS else 1 / 9) for op in OPERATORS}
    s.update(random.Random(0))
    assert s.last_clamped[Operator.ARGUMENTS] == P_MAX
    assert all(s.last_clamped[op] == P_MIN for op in OPERATORS if op is not Operator.ARGUMENTS)
    assert s.p[Operator.ARGUMENTS] == pytest.approx(0.95 / 1.4)


def test_cold_start_is_uniform():
    s = OperatorScheduler()
    s.update(random.Random(0))
    assert all(v == pytest.approx(0.1) for v in s.p.values())


def test_update_decays_fit():
    s = OperatorScheduler(decay=0.5)
    s.credit([Operator.ACCOUNT], 8, 0)
    s.update(random.Random(0))
    assert s.fit[Operator.ACCOUNT] == 4.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=10, max_size=10), st.floats(0, 1), st.integers(0, 2**32))
def test_update_keeps_valid_distribution(fits, sigma, seed):
    s = OperatorScheduler(sigma=sigma)
    s.fit = dict(zip(OPERATORS, fits))
    s.update(random.Random(seed))
    assert all(P_MIN <= v <= P_MAX for v in s.last_clamped.values())
    assert abs(sum(s.p.values()) - 1) <= 1e-9


def test_uniform_only_never_adapts():
    s = OperatorScheduler(uniform_only=True)
    s.credit([Operator.ARGUMENTS], 100, 0)
    s.update(random.Random(0))
    assert all(v == pytest.approx(0.1) for v in s.p.values())


# -- operators ----------------------------------------------------------------------

def test_timestamp_palette_single_field():
    base = Seed((Transaction("g()", env=TxEnv(timestamp=1000)),))
    seen = set()
    for n in range(60):
        child = apply(Operator.TIMESTAMP, base, PLAIN, random.Random(n))
        assert changed_fields(base, child) == [(0, "env.timestamp")]
        seen.add(child.txs[0].env.timestamp)
    assert {1001, 999, 1000 + 86400} <= seen


def test_arguments_on_zero_arg_call_inapplicable():
    with pytest.raises(InapplicableOperator):
        apply(Operator.ARGUMENTS, seq(("g()", [])), PLAIN, random.Random(0))


def test_amount_only_on_payable_calls():
    with pytest.raises(InapplicableOperator):
        apply(Operator.TX_AMOUNT, seq(("g()", [])), PLAIN, random.Random(0))
    child = apply(Operator.TX_AMOUNT, seq(("f(uint256)", [1])), PLAIN, random.Random(0))
    assert child.txs[0].value != 0


@pytest.mark.parametrize("op", OPERATORS)
def test_each_operator_changes_exactly_one_field(op):
    base = plain_seed(4)
    for n in range(40):
        try:
            child = apply(op, base, PLAIN, random.Random(n))
        except InapplicableOperator:
            continue
        assert len(changed_fields(base, child)) == 1, (op, changed_fields(base, child))


def test_ext_code_size_override_reaches_the_vm():
    child = apply(Operator.EXT_CODE_SIZE, seq(("g()", [])), PLAIN, random.Random(5))
    (target, size), = child.txs[0].env.ext_code_size
    probe = make_bundle(f"PUSH {target} EXTCODESIZE PUSH 0 MSTORE PUSH 32 PUSH 0 RETURN",
                        [("g", [], "nonpayable")])
    trace = execute_seed(probe, child).traces[0]
    assert int.from_bytes(trace.return_data, "big") == size


def test_mutate_with_resamples_inapplicable():
    picks = iter([Operator.TIMESTAMP])
    child, used = mutate_with([Operator.ARGUMENTS], seq(("g()", [])), PLAIN, random.Random(0),
                              resample=lambda: next(picks))
    assert used == [Operator.TIMESTAMP]
    assert child.txs[0].env.timestamp != TxEnv.at(0).timestamp


def test_mutate_with_nothing_applicable_clones():
    base = seq(("g()", []))
    child, used = mutate_with([Operator.ARGUMENTS], base, PLAIN, random.Random(0))
    assert used == [] and child.txs == base.txs


# -- crossover -------------------------------------------------------------------------

def test_plain_one_point_crossover():
    a = seq(("f(uint256)", [1]), ("f(uint256)", [2]), ("f(uint256)", [3]))
    b = seq(("f(uint256)", [7]), ("f(uint256)", [8]), ("f(uint256)", [9]))
    for n in range(50):
        ca, cb = crossover_raw_aware(a, b, random.Random(n))
        if ca.txs[0] == a.txs[0] and ca.txs[1] == b.txs[1]:
            assert ca.txs == (a.txs[0],) + b.txs[1:]
            assert cb.txs == (b.txs[0],) + a.txs[1:]
            break
    else:
        pytest.fail("cut 1/1 never drawn")


def test_raw_pair_spanning_sequence_has_no_interior_cut():
    assert legal_cuts(3, [(0, 2)]) == []
    assert legal_cuts(4, [(0, 1)]) == [2, 3]
    a = Seed(seq(*[("f(uint256)", [i]) for i in range(3)]).txs, raw_links=((0, 2),))
    b = seq(*[("f(uint256)", [10 + i]) for i in range(3)])
    for n in range(30):
        ca, cb = crossover_raw_aware(a, b, random.Random(n))
        assert ca.txs[:3] == a.txs  # A's whole sequence stays in its child as prefix
        assert a.txs[0] not in cb.txs


def test_identical_parents_give_clones():
    a = plain_seed(3)
    ca, cb = crossover_raw_aware(a, Seed(a.txs), random.Random(0))
    assert ca.txs == a.txs == cb.txs


def test_children_truncated_to_max_length():
    a, b = plain_seed(6), seq(*[("g()", [])] * 6)
    for n in range(20):
        ca, cb = crossover_raw_aware(a, b, random.Random(n), seq_len_max=5)
        assert len(ca) <= 5 and len(cb) <= 5


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_crossover_never_orphans_a_reader(storage_toy, n):
    rng = random.Random(n)
    a, b = (Seed(s.txs, raw_links=raw_links_of(execute_seed(storage_toy, s).traces))
            for s in (random_toy_seed(rng), random_toy_seed(rng)))
    plan = plan_crossover(a, b, random.Random(n))
    ca, cb = crossover_raw_aware(a, b, random.Random(n))
    if a.id == b.id or not (legal_cuts(len(a), a.raw_links) or legal_cuts(len(b), b.raw_links)):
        assert (ca.txs, cb.txs) == (a.txs, b.txs)
        return
    for parent, cut in ((a, plan.cut_a), (b, plan.cut_b)):
        assert not any(j < cut <= k for j, k in parent.raw_links)
    assert ca.txs == (a.txs[:plan.cut_a] + b.txs[plan.cut_b:])[:8]
    assert cb.txs == (b.txs[:plan.cut_b] + a.txs[plan.cut_a:])[:8]
