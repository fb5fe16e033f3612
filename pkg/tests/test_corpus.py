"""Seeds, pre-fuzz scoring, Top-K selection and corpus persistence."""

from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from llamafuzz.corpus import (
    CorruptCorpus,
    Origin,
    PreFuzzScore,
    Seed,
    TopKConfig,
    Transaction,
    TxEnv,
    execute_seed,
    load,
    load_seed_file,
    persist,
    prefuzz_score,
    score_traces,
    seed_from_json,
    seed_to_json,
    select_top_k,
)

from conftest import seq


def _seeds(n: int) -> list[Seed]:
    return [seq(("setA(uint256)", [i]), ("getA()", [])) for i in range(n)]


# -- scoring ---------------------------------------------------------------------

def test_score_with_exception_bonus():
    assert PreFuzzScore(50, 1, 0.5).score == 50.5


def test_score_without_exception():
    assert PreFuzzScore(50, 0, 0.5).score == 50.0


def test_equal_traces_score_equal(storage_toy):
    s = seq(("setA(uint256)", [3]), ("swap()", []))
    assert prefuzz_score(s, storage_toy) == prefuzz_score(Seed(s.txs), storage_toy)


def test_score_counts_sites_edges_and_any_exception(storage_toy):
    run = execute_seed(storage_toy, seq(("setA(uint256)", [1]), ("fail()", [])))
    sc = score_traces(run.traces, 0.5)
    sites = {(a, pc) for t in run.traces for a, pc, _ in t.instr_sites}
    edges = {e for t in run.traces for e in t.branch_edges}
    assert sc.coverage == len(sites) + len(edges)
    assert sc.exception == 1


# -- Top-K ---------------------------------------------------------------------

@pytest.mark.parametrize("n,rho,k_max,k", [(100, 0.1, 20, 10), (500, 0.1, 32, 32), (3, 0.5, 32, 2)])
def test_top_k_size(n, rho, k_max, k):
    assert TopKConfig(rho, k_max).k(n) == k


def test_top_k_rejects_empty_and_bad_config():
    with pytest.raises(ValueError):
        select_top_k([])
    with pytest.raises(ValueError):
        TopKConfig(rho=0.0)
    with pytest.raises(ValueError):
        TopKConfig(k_max=0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 1)), min_size=1, max_size=40),
       st.floats(0.01, 0.99), st.integers(1, 12))
def test_top_k_matches_sort_oracle(scores, rho, k_max):
    pool = _seeds(len(scores))
    scored = [(s, PreFuzzScore(c, e, 0.5)) for s, (c, e) in zip(pool, scores)]
    k = min(k_max, math.ceil(rho * len(pool)))
    oracle = sorted(scored, key=lambda p: (-(p[1].coverage + 0.5 * p[1].exception), p[0].id))[:k]
    assert [s.id for s in select_top_k(scored, TopKConfig(rho, k_max))] == [s.id for s, _ in oracle]


# -- identity and serialisation -------------------------------------------------------

def test_seed_id_is_content_hash():
    a = seq(("setA(uint256)", [1]))
    b = Seed(a.txs, Origin.LLM, fit=9)
    c = seq(("setA(uint256)", [2]))
    assert a.id == b.id != c.id
    assert len(a.id) == 32


def test_empty_seed_rejected():
    with pytest.raises(ValueError):
        Seed(())


values = st.one_of(st.booleans(), st.integers(-(2**255), 2**256 - 1), st.binary(max_size=40),
                   st.text(max_size=10))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(values, st.integers(0, 2), st.integers(0, 10**20), st.integers(0, 10**10),
                          st.none() | st.integers(0, 5)), min_size=1, max_size=5))
def test_json_round_trip(rows):
    txs = tuple(Transaction("f(uint256)", (v, (v, v)), snd, val,
                            TxEnv(timestamp=ts, call_return=cr, balance_overrides=((1, 2),)))
                for v, snd, val, ts, cr in rows)
    s = Seed(txs, Origin.MUTATION, fit=3, raw_links=((0, 1),))
    back = seed_from_json(seed_to_json(s))
    assert back.txs == s.txs and back.id == s.id and back.fit == 3 and back.raw_links == ((0, 1),)


def test_persist_load_round_trip(tmp_path):
    pool = _seeds(10)
    persist(pool, tmp_path / "c")
    assert [s.id for s in load(tmp_path / "c")] == [s.id for s in pool]


def test_persist_replaces_previous_contents(tmp_path):
    persist(_seeds(5), tmp_path)
    persist(_seeds(2), tmp_path)
    assert len(load(tmp_path)) == 2


def test_empty_pool_round_trips(tmp_path):
    persist([], tmp_path / "empty")
    assert load(tmp_path / "empty") == []


def test_truncated_file_is_corrupt(tmp_path):
    persist(_seeds(3), tmp_path)
    victim = sorted(tmp_path.glob("*.json"))[0]
    victim.write_text(victim.read_text()[:40])
    with pytest.raises(CorruptCorpus):
        load(tmp_path)


def test_tampered_content_is_corrupt(tmp_path):
    persist(_seeds(1), tmp_path)
    f = next(tmp_path.glob("*.json"))
    f.write_text(f.read_text().replace('"0x0"', '"0x1"', 1))
    with pytest.raises(CorruptCorpus):
        load(tmp_path)


def test_load_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        load(tmp_path / "nope")


def test_load_seed_file(tmp_path):
    s = _seeds(1)[0]
    persist([s], tmp_path)
    assert load_seed_file(tmp_path / f"{s.id}.json").id == s.id


# -- execution ------------------------------------------------------------------

def test_execution_is_deterministic(storage_toy):
    rng = random.Random(4)
    s = seq(*[("setA(uint256)", [rng.randrange(100)]) for _ in range(3)], ("swap()", []))
    d1 = [t.digest() for t in execute_seed(storage_toy, s).traces]
    d2 = [t.digest() for t in execute_seed(storage_toy, s).traces]
    assert d1 == d2


def test_default_env_advances_per_position():
    assert TxEnv.at(0).timestamp + 12 == TxEnv.at(1).timestamp
    assert TxEnv.at(3).block_number == TxEnv.at(0).block_number + 3
