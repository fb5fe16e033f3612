"""Seeds (transaction sequences), pre-fuzz scoring, Top-K selection and persistence."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from functools import cached_property
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

from .abi import encode_call
from .bundle import BASE_BLOCK, BASE_TIMESTAMP, BLOCK_INTERVAL, DEFAULT_GAS, Bundle
from .feedback import FitnessRecord, raw_dependencies, trace_edges, trace_sites
from .vm import Call, Environment, ExecutionTrace, WorldState, execute_sequence
from .vm.interpreter import StepHook


class CorruptCorpus(Exception):
    pass


class Origin(str, enum.Enum):
    LLM = "LLM"
    STUB = "Stub"
    MUTATION = "Mutation"
    CROSSOVER = "Crossover"
    SYMBOLIC = "Symbolic"
    RANDOM = "Random"


@dataclass(frozen=True)
class TxEnv:
    """Per-transaction environment; overrides are sorted tuples so the env hashes."""

    timestamp: int = BASE_TIMESTAMP
    block_number: int = BASE_BLOCK
    gas_limit: int = DEFAULT_GAS
    balance_overrides: tuple[tuple[int, int], ...] = ()
    call_return: int | None = None
    return_data_size: int | None = None
    ext_code_size: tuple[tuple[int, int], ...] = ()

    @classmethod
    def at(cls, position: int) -> "TxEnv":
        """Default environment of the transaction at ``position`` in a sequence."""
        return cls(BASE_TIMESTAMP + BLOCK_INTERVAL * position, BASE_BLOCK + position)


@dataclass(frozen=True)
class Transaction:
    function: str  # canonical signature
    args: tuple[Any, ...] = ()
    sender: int = 0  # index into the bundle's account list
    value: int = 0
    env: TxEnv = field(default_factory=TxEnv)

    def with_env(self, **changes) -> "Transaction":
        return replace(self, env=replace(self.env, **changes))


@dataclass
class Seed:
    txs: tuple[Transaction, ...]
    origin: Origin = Origin.STUB
    fitness: FitnessRecord = field(default_factory=FitnessRecord)
    fit: int = 0  # historical maximum of per-generation fitness
    raw_links: tuple[tuple[int, int], ...] = ()  # (writer tx, reader tx) index pairs

    def __post_init__(self) -> None:
        self.txs = tuple(self.txs)
        if not self.txs:
            raise ValueError("a seed needs at least one transaction")

    @cached_property
    def id(self) -> str:
        return seed_id(self.txs)

    def __len__(self) -> int:
        return len(self.txs)


# -- canonical JSON ----------------------------------------------------------------

def _enc_value(v: Any) -> Any:
    if isinstance(v, bool):
        return v
    if isinstance(v, int):
        return hex(v) if v >= 0 else "-" + hex(-v)
    if isinstance(v, (bytes, bytearray)):
        return {"hex": bytes(v).hex()}
    if isinstance(v, str):
        return {"str": v}
    if isinstance(v, (tuple, list)):
        return [_enc_value(x) for x in v]
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _dec_value(v: Any) -> Any:
    if isinstance(v, bool):
        return v
    if isinstance(v, str):
        return -int(v[1:], 16) if v.startswith("-") else int(v, 16)
    if isinstance(v, dict):
        if "hex" in v:
            return bytes.fromhex(v["hex"])
        return v["str"]
    if isinstance(v, list):
        return tuple(_dec_value(x) for x in v)
    raise CorruptCorpus(f"bad argument encoding {v!r}")


def tx_to_json(tx: Transaction) -> dict:
    e = tx.env
    return {
        "function": tx.function,
        "args": [_enc_value(a) for a in tx.args],
        "sender": tx.sender,
        "value": hex(tx.value),
        "env": {
            "timestamp": e.timestamp,
            "block_number": e.block_number,
            "gas_limit": e.gas_limit,
            "balance_overrides": [[hex(a), hex(b)] for a, b in e.balance_overrides],
            "call_return": None if e.call_return is None else hex(e.call_return),
            "return_data_size": e.return_data_size,
            "ext_code_size": [[hex(a), n] for a, n in e.ext_code_size],
        },
    }


def tx_from_json(doc: dict) -> Transaction:
    e = doc["env"]
    env = TxEnv(
        timestamp=int(e["timestamp"]),
        block_number=int(e["block_number"]),
        gas_limit=int(e["gas_limit"]),
        balance_overrides=tuple((int(a, 16), int(b, 16)) for a, b in e["balance_overrides"]),
        call_return=None if e["call_return"] is None else int(e["call_return"], 16),
        return_data_size=e["return_data_size"],
        ext_code_size=tuple((int(a, 16), int(n)) for a, n in e["ext_code_size"]),
    )
    return Transaction(doc["function"], tuple(_dec_value(a) for a in doc["args"]),
                       int(doc["sender"]), int(doc["value"], 16), env)


def seed_id(txs: Sequence[Transaction]) -> str:
    canon = json.dumps([tx_to_json(t) for t in txs], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:32]


def seed_to_json(seed: Seed) -> dict:
    f = seed.fitness
    return {
        "id": seed.id,
        "origin": seed.origin.value,
        "fitness": {"delta_branch": f.delta_branch, "delta_inst": f.delta_inst,
                    "delta_raw": f.delta_raw},
        "fit": seed.fit,
        "raw_links": [list(p) for p in seed.raw_links],
        "txs": [tx_to_json(t) for t in seed.txs],
    }


def seed_from_json(doc: dict) -> Seed:
    try:
        f = doc["fitness"]
        seed = Seed(
            tuple(tx_from_json(t) for t in doc["txs"]),
            Origin(doc["origin"]),
            FitnessRecord(int(f["delta_branch"]), int(f["delta_inst"]), int(f["delta_raw"])),
            int(doc["fit"]),
            tuple((int(a), int(b)) for a, b in doc.get("raw_links", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCorpus(f"malformed seed document: {exc}") from exc
    if seed.id != doc.get("id"):
        raise CorruptCorpus(f"seed id mismatch: file says {doc.get('id')}, content hashes to {seed.id}")
    return seed


# -- execution ----------------------------------------------------------------------

def to_calls(bundle: Bundle, seed: Seed) -> list[Call]:
    calls = []
    for tx in seed.txs:
        fd = bundle.function(tx.function)
        e = tx.env
        env = Environment(
            timestamp=e.timestamp,
            block_number=e.block_number,
            gas_limit=e.gas_limit,
            caller=bundle.accounts[tx.sender % len(bundle.accounts)],
            call_value=tx.value,
            balance_overrides=dict(e.balance_overrides),
            call_return_override=e.call_return,
            return_data_size_override=e.return_data_size,
            ext_code_size_override=dict(e.ext_code_size),
        )
        calls.append(Call(bundle.address, encode_call(fd, tx.args), env))
    return calls


@dataclass
class SeedRun:
    traces: list[ExecutionTrace]
    pre_state: WorldState
    post_state: WorldState


def execute_seed(bundle: Bundle, seed: Seed, hook: StepHook | None = None,
                 state: WorldState | None = None) -> SeedRun:
    """Run a seed from a fresh copy of the bundle's initial state."""
    pre = state if state is not None else bundle.initial_state()
    traces, post = execute_sequence(pre, to_calls(bundle, seed), hook)
    return SeedRun(traces, pre, post)


def raw_links_of(traces: Sequence[ExecutionTrace]) -> tuple[tuple[int, int], ...]:
    return tuple(sorted({(j, k) for j, k, _, _ in raw_dependencies(traces)}))


# -- pre-fuzz scoring and Top-K ---------------------------------------------------------

@dataclass(frozen=True)
class PreFuzzScore:
    coverage: int
    exception: int
    lam: float

    @property
    def score(self) -> float:
        return self.coverage + self.lam * self.exception


def score_traces(traces: Sequence[ExecutionTrace], lam: float = 0.5) -> PreFuzzScore:
    coverage = len(trace_sites(traces)) + len(trace_edges(traces))
    exception = int(any(t.exception is not None for t in traces))
    return PreFuzzScore(coverage, exception, lam)


def prefuzz_score(seed: Seed, bundle: Bundle, lam: float = 0.5) -> PreFuzzScore:
    return score_traces(execute_seed(bundle, seed).traces, lam)


@dataclass(frozen=True)
class TopKConfig:
    rho: float = 0.1
    k_max: int = 32

    def __post_init__(self) -> None:
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")

    def k(self, n: int) -> int:
        return min(self.k_max, math.ceil(self.rho * n))


def select_top_k(scored: Sequence[tuple[Seed, PreFuzzScore]], cfg: TopKConfig = TopKConfig()) -> list[Seed]:
    if not scored:
        raise ValueError("select_top_k needs at least one seed")
    k = cfg.k(len(scored))
    ranked = sorted(scored, key=lambda p: (-p[1].score, p[0].id))
    return [s for s, _ in ranked[:k]]


# -- persistence -------------------------------------------------------------------------

def persist(pool: Iterable[Seed], path: str | Path) -> None:
    """Write one JSON document per seed, named by seed id; replaces older files."""
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    for old in d.glob("*.json"):
        old.unlink()
    for index, seed in enumerate(pool):
        doc = seed_to_json(seed)
        doc["index"] = index
        (d / f"{seed.id}.json").write_text(json.dumps(doc, indent=1, sort_keys=True))


def load(path: str | Path) -> list[Seed]:
    d = Path(path)
    if not d.is_dir():
        raise FileNotFoundError(f"{d}: no corpus directory")
    entries = []
    for f in sorted(d.glob("*.json")):
        try:
            doc = json.loads(f.read_text())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CorruptCorpus(f"{f.name}: {exc}") from exc
        if not isinstance(doc, dict):
            raise CorruptCorpus(f"{f.name}: not a seed document")
        seed = seed_from_json(doc)
        if f.stem != seed.id:
            raise CorruptCorpus(f"{f.name}: file name does not match seed id {seed.id}")
        entries.append((doc.get("index", 0), seed.id, seed))
    entries.sort(key=lambda e: (e[0], e[1]))
    return [s for _, _, s in entries]


def load_seed_file(path: str | Path) -> Seed:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CorruptCorpus(f"{path}: {exc}") from exc
    return seed_from_json(doc)
