from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from llamafuzz.abi import parse_abi
from llamafuzz.asm import assemble
from llamafuzz.bundle import Bundle, load_bundle
from llamafuzz.corpus import Seed, Transaction, TxEnv
from llamafuzz.vm import Bytecode

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
BUNDLES = sorted(p.name for p in CORPUS.iterdir() if (p / "code.bin").exists())


def corpus_bundle(name: str) -> Bundle:
    return load_bundle(CORPUS / name)


def make_bundle(source: str, functions: list[tuple[str, list[str], str]], **kw) -> Bundle:
    """Build an in-memory bundle from assembly and (name, input types, mutability) rows."""
    abi = [{"type": "function", "name": n, "inputs": [{"name": f"a{i}", "type": t} for i, t in enumerate(ins)],
            "outputs": [], "stateMutability": mut} for n, ins, mut in functions]
    return Bundle(kw.pop("name", "inline"), Bytecode(assemble(source)), parse_abi(json.dumps(abi)), **kw)


def seq(*calls, origin=None) -> Seed:
    """Seed from (signature, args[, sender[, value]]) tuples with positional default envs."""
    txs = []
    for i, c in enumerate(calls):
        sig, args, *rest = c
        sender = rest[0] if rest else 1
        value = rest[1] if len(rest) > 1 else 0
        txs.append(Transaction(sig, tuple(args), sender, value, TxEnv.at(i)))
    return Seed(tuple(txs)) if origin is None else Seed(tuple(txs), origin)


TOY_CALLS = [("setA(uint256)", 1), ("setB(uint256)", 1), ("getA()", 0), ("getB()", 0), ("swap()", 0),
             ("fail()", 0)]


def random_toy_seed(rng: random.Random, max_len: int = 6) -> Seed:
    """Random storage_toy sequence with small argument values (so slots collide)."""
    calls = []
    for _ in range(rng.randint(1, max_len)):
        sig, arity = rng.choice(TOY_CALLS)
        calls.append((sig, [rng.randrange(4)] * arity))
    return seq(*calls)


@pytest.fixture(scope="session")
def storage_toy() -> Bundle:
    return corpus_bundle("storage_toy")


@pytest.fixture(scope="session")
def magic() -> Bundle:
    return corpus_bundle("magic_constant")


@pytest.fixture(scope="session")
def token() -> Bundle:
    return corpus_bundle("token")


# -- acceptance summary ------------------------------------------------------------
# test_acceptance.py records one verdict per criterion here; the hook below
# prints them as a block at the end of the run.

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {line}")
