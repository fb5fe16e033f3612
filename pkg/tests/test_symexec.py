"""Concolic constraint collection, solving, branch flipping and seed synthesis."""

from __future__ import annotations

import random
import shutil

import pytest
from hypothesis import given, settings, strategies as st

from llamafuzz.corpus import execute_seed
from llamafuzz.feedback import GlobalCoverage, commit, trace_edges
from llamafuzz.symexec import (
    Builder,
    BuiltinSolver,
    SmtSolver,
    SolverUnavailable,
    Status,
    SymbolicBudgetExceeded,
    ValidationFailed,
    collect_constraints,
    const,
    evaluate,
    explore,
    flip_and_solve,
    flip_query,
    sym,
    synthesize_seed,
    to_smtlib,
)
from llamafuzz.symexec.expr import BINARY, apply_op, symbols
from llamafuzz.symexec.solver import satisfied
from llamafuzz.vm import Environment, WorldState, execute_transaction
from llamafuzz.vm.state import Account, Bytecode

from conftest import BUNDLES, corpus_bundle, make_bundle, random_toy_seed, seq

MAGIC = make_bundle("PUSH 4 CALLDATALOAD PUSH 0xdeadbeef EQ PUSH @hit JUMPI STOP "
                    "hit: PUSH 1 PUSH 0 SSTORE STOP", [("f", ["uint256"], "nonpayable")])
GUARDED = make_bundle("PUSH 0 SLOAD PUSH @armed JUMPI STOP "
                      "armed: PUSH 4 CALLDATALOAD PUSH 7 EQ PUSH @hit JUMPI STOP "
                      "hit: PUSH 2 PUSH 1 SSTORE STOP", [("f", ["uint256"], "nonpayable")])
CLOCK = make_bundle("TIMESTAMP PUSH 2000000000 LT PUSH @late JUMPI STOP late: STOP",
                    [("f", ["uint256"], "nonpayable")])

needs_z3 = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 binary not installed")


def x_lt(n):  # x < n, EVM operand order (a = top)
    return ("lt", sym("x"), const(n))


def x_gt(n):
    return ("gt", sym("x"), const(n))


# -- constraint collection ------------------------------------------------------------

def test_magic_branch_constraint():
    pc = collect_constraints(MAGIC, seq(("f(uint256)", [5])))
    assert len(pc) == 1
    b = pc[0]
    assert b.taken is False and b.tx == 0
    assert b.predicate[0] == "eq"
    assert symbols(b.predicate) == {"tx0.arg0"}
    assert evaluate(b.predicate, {"tx0.arg0": 0xDEADBEEF}) == 1
    assert evaluate(b.predicate, {"tx0.arg0": 5}) == 0
    assert pc.values["tx0.arg0"] == 5


def test_straight_line_has_no_constraints():
    bundle = make_bundle("PUSH 1 PUSH 2 ADD POP STOP", [("f", [], "nonpayable")])
    assert len(collect_constraints(bundle, seq(("f()", [])))) == 0


def test_concrete_loop_gives_one_entry_per_jumpi():
    bundle = make_bundle("PUSH 3 loop: PUSH 1 SWAP1 SUB DUP1 PUSH @loop JUMPI STOP", [("f", [], "nonpayable")])
    pc = collect_constraints(bundle, seq(("f()", [])))
    assert [(b.taken, b.predicate) for b in pc.branches] == [(True, None), (True, None), (False, None)]


def test_block_data_is_symbolic():
    pc = collect_constraints(CLOCK, seq(("f(uint256)", [0])))
    assert symbols(pc[0].predicate) == {"tx0.timestamp"}


def test_callvalue_only_for_payable(magic):
    pc = collect_constraints(magic, seq(("check(uint256)", [1])))
    assert "tx0.callvalue" not in pc.values
    pay = make_bundle("CALLVALUE PUSH @x JUMPI STOP x: STOP", [("d", [], "payable")])
    pc = collect_constraints(pay, seq(("d()", [], 1, 0)))
    assert symbols(pc[0].predicate) == {"tx0.callvalue"}
    assert pc.domains["tx0.callvalue"] == (0, pay.account_balance)


@pytest.mark.parametrize("name", BUNDLES)
def test_symbolic_path_matches_concrete_trace(name):
    from llamafuzz.campaign import random_seed

    bundle = corpus_bundle(name)
    rng = random.Random(name)
    for _ in range(15):
        s = random_seed(bundle, rng)
        pc = collect_constraints(bundle, s)
        concrete = [e for t in execute_seed(bundle, s).traces for e in t.branch_edges]
        assert [b.edge for b in pc.branches] == concrete
        for b in pc.branches:  # every predicate evaluates to the observed outcome
            if b.predicate is not None:
                assert (evaluate(b.predicate, pc.values) != 0) == b.taken


def test_node_budget_enforced(storage_toy):
    with pytest.raises(SymbolicBudgetExceeded):
        collect_constraints(MAGIC, seq(("f(uint256)", [5])), node_budget=1)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(sorted(BINARY)), st.integers(0, 2**256 - 1), st.integers(0, 2**256 - 1))
def test_operator_semantics_match_vm(op, a, b):
    if op in ("shl", "shr", "byte"):
        a %= 300
    name = {"sdiv": "SDIV"}.get(op, op.upper())
    from llamafuzz.asm import assemble

    code = assemble(f"PUSH32 {b} PUSH32 {a} {name} PUSH 0 MSTORE PUSH 32 PUSH 0 RETURN")
    st_ = WorldState({1: Account(0, Bytecode(code)), 2: Account(0)})
    tr, _ = execute_transaction(st_, 1, b"", Environment(caller=2))
    assert int.from_bytes(tr.return_data, "big") == apply_op(op, a, b)


# -- solving -----------------------------------------------------------------------

def test_flip_magic_is_sat_and_reexecutes():
    base = seq(("f(uint256)", [5]))
    pc = collect_constraints(MAGIC, base)
    res = flip_and_solve(pc, 0)
    assert res.status is Status.SAT and res.assignment["tx0.arg0"] == 0xDEADBEEF
    child = synthesize_seed(MAGIC, base, res.assignment, pc[0].flipped_edge)
    assert child.txs[0].args == (0xDEADBEEF,)
    assert pc[0].flipped_edge in trace_edges(execute_seed(MAGIC, child).traces)


def test_empty_interval_is_unsat():
    res = BuiltinSolver().solve([(x_lt(10), True), (x_gt(20), True)], {"x": 0}, {"x": (0, 2**256 - 1)}, 1000)
    assert res.status is Status.UNSAT


def test_domain_violation_is_unsat():
    res = BuiltinSolver().solve([(x_gt(300), True)], {"x": 0}, {"x": (0, 255)}, 1000)
    assert res.status is Status.UNSAT


def test_opaque_hash_is_unknown():
    b = Builder()
    h = b.keccak((sym("x"),))
    res = BuiltinSolver(max_trials=256).solve([(("eq", h, const(12345)), True)], {"x": 0},
                                              {"x": (0, 2**256 - 1)}, 300)
    assert res.status is Status.UNKNOWN


def test_arithmetic_inversion():
    e = ("eq", ("add", ("mul", sym("x"), const(3)), const(1)), const(100))
    res = BuiltinSolver().solve([(e, True)], {"x": 0}, {"x": (0, 2**256 - 1)}, 2000)
    assert res.status is Status.SAT and res.assignment["x"] == 33


def test_two_symbol_conjunction():
    cons = [(("eq", sym("a"), const(0x1234)), True), (("gt", sym("b"), sym("a")), True)]
    res = BuiltinSolver().solve(cons, {"a": 0, "b": 0}, {"a": (0, 2**64), "b": (0, 2**64)}, 2000)
    assert res.status is Status.SAT and satisfied(cons, res.assignment)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["lt", "gt", "eq"]), st.integers(0, 2**40), st.booleans())
def test_sat_answers_are_sound(seed, op, k, want):
    e = (op, ("add", sym("x"), const(seed)), const(k))
    res = BuiltinSolver(max_trials=512, rng_seed=seed).solve([(e, want)], {"x": 0},
                                                             {"x": (0, 2**256 - 1)}, 300)
    if res.status is Status.SAT:
        assert satisfied([(e, want)], res.assignment)


def test_flip_query_keeps_only_related_prefix():
    from llamafuzz.symexec.concolic import Branch, PathConstraint

    pc = PathConstraint([Branch(0, 1, 1, x_gt(3), True), Branch(0, 1, 2, ("lt", sym("y"), const(5)), True),
                         Branch(0, 1, 3, None, True), Branch(0, 1, 4, x_lt(9), False)])
    q = flip_query(pc, 3)
    assert q == [(x_gt(3), True), (x_lt(9), True)]


# -- synthesis and exploration -------------------------------------------------------

def test_timestamp_assignment_replaces_env_only():
    base = seq(("f(uint256)", [42]))
    child = synthesize_seed(CLOCK, base, {"tx0.timestamp": 2_100_000_000})
    assert child.txs[0].env.timestamp == 2_100_000_000
    assert child.txs[0].args == (42,)
    assert child.txs[0].env.block_number == base.txs[0].env.block_number


def test_stale_assignment_fails_validation():
    armed = WorldState(GUARDED.initial_state().accounts)
    armed.accounts[GUARDED.address] = Account(0, GUARDED.code, {0: 1})
    base = seq(("f(uint256)", [1]))
    pc = collect_constraints(GUARDED, base, state=armed)
    idx = next(i for i, b in enumerate(pc.branches) if b.predicate is not None)
    res = flip_and_solve(pc, idx)
    assert res.status is Status.SAT and res.assignment["tx0.arg0"] == 7
    with pytest.raises(ValidationFailed):  # the real initial state has slot 0 unset
        synthesize_seed(GUARDED, base, res.assignment, pc[idx].flipped_edge)


def test_explore_reaches_magic_branch(magic):
    base = seq(("check(uint256)", [1]))
    cov = GlobalCoverage()
    commit(cov, execute_seed(magic, base).traces)
    res = explore(magic, base, cov)
    assert len(res.seeds) == 1 and res.seeds[0].origin.value == "Symbolic"
    new_edges = trace_edges(execute_seed(magic, res.seeds[0]).traces) - cov.branch_edges
    assert new_edges


def test_explore_skips_covered_and_failed(magic):
    base = seq(("check(uint256)", [1]))
    cov = GlobalCoverage()
    commit(cov, execute_seed(magic, base).traces)
    failed = {b.flipped_edge for b in collect_constraints(magic, base).branches}
    assert explore(magic, base, cov, failed=failed).attempts == 0


def test_explore_reports_budget(magic):
    res = explore(magic, seq(("check(uint256)", [1])), GlobalCoverage(), node_budget=1)
    assert res.budget_exceeded and res.seeds == []


# -- SMT backend ---------------------------------------------------------------------

def test_smtlib_script_shape():
    script, syms = to_smtlib([(x_lt(10), True)], {"x": (0, 255)})
    assert "(set-logic QF_BV)" in script and "(check-sat)" in script
    assert syms == ["x"]


def test_missing_solver_binary():
    with pytest.raises(SolverUnavailable):
        SmtSolver("definitely-not-a-solver")


@needs_z3
def test_z3_magic_and_unsat():
    pc = collect_constraints(MAGIC, seq(("f(uint256)", [5])))
    res = flip_and_solve(pc, 0, solver=SmtSolver())
    assert res.status is Status.SAT and res.assignment["tx0.arg0"] == 0xDEADBEEF
    un = SmtSolver().solve([(x_lt(10), True), (x_gt(20), True)], {"x": 0}, {"x": (0, 2**256 - 1)}, 5000)
    assert un.status is Status.UNSAT


@needs_z3
def test_z3_hash_model_is_revalidated():
    h = Builder().keccak((sym("x"),))
    res = SmtSolver().solve([(("eq", h, const(12345)), True)], {"x": 0}, {"x": (0, 2**256 - 1)}, 5000)
    assert res.status is Status.UNKNOWN


@needs_z3
def test_z3_agrees_with_builtin_on_nonlinear():
    e = ("eq", ("mul", sym("x"), sym("x")), const(144))
    dom = {"x": (0, 1000)}
    r = SmtSolver().solve([(e, True)], {"x": 0}, dom, 5000)
    assert r.status is Status.SAT and r.assignment["x"] == 12
