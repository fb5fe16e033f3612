"""Runtime bug oracles.

Each detector inspects the traces of one seed execution (plus the pre/post
world states and bundle metadata) and returns findings with trace evidence.
Two detectors (block dependency, transaction ordering) confirm their
suspicion by concrete differential re-execution of the sequence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

from .bundle import Bundle
from .corpus import Seed, execute_seed
from .vm import ExecutionTrace, Fault, WorldState
from .vm.opcodes import iter_instructions


class BugClass(str, enum.Enum):
    AF = "AF"  # assertion failure
    BD = "BD"  # block-data dependency
    IO = "IO"  # integer overflow
    LE = "LE"  # ether leak
    FE = "FE"  # frozen ether
    RE = "RE"  # reentrancy
    TD = "TD"  # transaction-order dependency
    UE = "UE"  # unhandled exception
    US = "US"  # unprotected selfdestruct
    UD = "UD"  # unsafe delegatecall


DESCRIPTIONS = {
    BugClass.AF: "assertion failure reached after a state change",
    BugClass.BD: "value transfer depends on block timestamp/number",
    BugClass.IO: "wrapped arithmetic result reaches storage or a call value",
    BugClass.LE: "ether sent to an untrusted account that never paid in",
    BugClass.FE: "contract accepts ether but cannot send it",
    BugClass.RE: "state updated after a re-entered value transfer",
    BugClass.TD: "attacker outcome depends on transaction order",
    BugClass.UE: "failed call status is ignored",
    BugClass.US: "selfdestruct callable by an unprivileged account",
    BugClass.UD: "delegatecall to an attacker-controlled target",
}


@dataclass(frozen=True)
class BugReport:
    bug_class: BugClass
    seed_id: str
    tx_index: int
    address: int  # code address holding ``pc``
    pc: int
    description: str

    @property
    def key(self) -> tuple[BugClass, int, int]:
        return (self.bug_class, self.address, self.pc)

    def to_json(self) -> dict:
        return {"class": self.bug_class.value, "seed": self.seed_id, "tx": self.tx_index,
                "address": hex(self.address), "pc": self.pc, "description": self.description}


@dataclass
class Observation:
    """Everything a detector may look at; built once per seed execution."""

    traces: Sequence[ExecutionTrace]
    pre_state: WorldState
    post_state: WorldState
    bundle: Bundle
    seed: Seed | None = None

    @property
    def seed_id(self) -> str:
        return self.seed.id if self.seed is not None else ""

    def report(self, cls: BugClass, tx: int, address: int, pc: int, extra: str = "") -> BugReport:
        text = DESCRIPTIONS[cls] + (f" ({extra})" if extra else "")
        return BugReport(cls, self.seed_id, tx, address, pc, text)


Detector = Callable[[Observation], list[BugReport]]


def _site(trace: ExecutionTrace, pc: int, ops: tuple[int, ...]) -> int:
    """Code address of the first executed instruction at ``pc`` with one of ``ops``."""
    return next(a for a, p, op in trace.instr_sites if p == pc and op in ops)


def _ok(traces: Sequence[ExecutionTrace]) -> Iterable[tuple[int, ExecutionTrace]]:
    return ((i, t) for i, t in enumerate(traces) if t.exception is None)


def detect_af(ob: Observation) -> list[BugReport]:
    out = []
    changed_before = False
    for i, t in enumerate(ob.traces):
        if t.exception is Fault.ASSERT_FAIL and t.fault_pc is not None:
            in_tx = bool(t.storage_writes) or any(x.amount for x in t.ether_transfers)
            if changed_before or in_tx:
                out.append(ob.report(BugClass.AF, i, t.to, t.fault_pc))
        if t.exception is None and (t.storage_writes or any(x.amount for x in t.ether_transfers)):
            changed_before = True
    return out


def _outgoing(trace: ExecutionTrace, contract: int) -> tuple:
    if trace.exception is not None:
        return ("failed",)
    return tuple((x.dst, x.amount) for x in trace.ether_transfers if x.src == contract and x.amount)


BD_DELTAS = tuple(d for k in range(1, 13) for d in (k, -k))


def detect_bd(ob: Observation) -> list[BugReport]:
    if ob.seed is None:
        return []
    contract = ob.bundle.address
    for i, t in _ok(ob.traces):
        if not t.block_branches:
            continue
        base = _outgoing(t, contract)
        tx = ob.seed.txs[i]
        for field_name in ("timestamp", "block_number"):
            current = getattr(tx.env, field_name)
            for d in BD_DELTAS:
                if current + d < 0:
                    continue
                txs = list(ob.seed.txs)
                txs[i] = tx.with_env(**{field_name: current + d})
                run = execute_seed(ob.bundle, Seed(tuple(txs)), state=ob.pre_state)
                if _outgoing(run.traces[i], contract) != base:
                    addr, pc = t.block_branches[0]
                    return [ob.report(BugClass.BD, i, addr, pc, f"{field_name} {d:+d}")]
    return []


def detect_io(ob: Observation) -> list[BugReport]:
    return [ob.report(BugClass.IO, i, w.address, w.arith_pc, f"reaches {w.sink} at pc {w.sink_pc}")
            for i, t in _ok(ob.traces) for w in t.wraps]


def detect_le(ob: Observation) -> list[BugReport]:
    attackers = ob.bundle.attacker_addresses
    contract = ob.bundle.address
    paid_in = {t.sender for _, t in _ok(ob.traces) for x in t.ether_transfers
               if x.pc is None and x.amount}
    out = []
    for i, t in _ok(ob.traces):
        for x in t.ether_transfers:
            if x.src == contract and x.dst in attackers and x.amount and x.dst not in paid_in:
                out.append(ob.report(BugClass.LE, i, _site(t, x.pc, (0xF1, 0xFF)), x.pc,
                                     f"{x.amount} wei"))
    return out


def can_send_value(code: bytes) -> bool:
    return any(op in (0xF1, 0xF4, 0xFF) for _, op, _ in iter_instructions(code))


def detect_fe(ob: Observation) -> list[BugReport]:
    contract = ob.bundle.address
    if ob.post_state.balance(contract) == 0:
        return []
    code = ob.post_state.code(contract)
    if code is None or can_send_value(code.code):
        return []
    for i, t in _ok(ob.traces):
        if t.to == contract and any(x.pc is None and x.dst == contract and x.amount
                                    for x in t.ether_transfers):
            return [ob.report(BugClass.FE, i, contract, t.instr_sites[0][1])]
    return []


def detect_re(ob: Observation) -> list[BugReport]:
    out = []
    for i, t in _ok(ob.traces):
        for c in t.external_calls:
            if c.kind != "CALL" or not c.value or not c.reentered or not c.success:
                continue
            read_before = {r.slot for r in t.storage_reads
                           if r.frame == c.frame and r.address == c.caller and r.order < c.start_order}
            written_after = [w for w in t.storage_writes
                             if w.frame == c.frame and w.address == c.caller and w.order > c.end_order
                             and w.slot in read_before]
            if written_after:
                out.append(ob.report(BugClass.RE, i, _site(t, c.pc, (0xF1,)), c.pc, f"slot {written_after[0].slot:#x}"))
    return out


def _may_interfere(a: ExecutionTrace, b: ExecutionTrace) -> bool:
    """Cheap necessary condition for order dependence of two adjacent transactions.

    Without a storage conflict (one writes what the other touches) and
    without ether moving in both, swapping them cannot change the outcome.
    """
    wa = {(w.address, w.slot) for w in a.storage_writes}
    wb = {(w.address, w.slot) for w in b.storage_writes}
    ra = {(r.address, r.slot) for r in a.storage_reads}
    rb = {(r.address, r.slot) for r in b.storage_reads}
    if wa & (wb | rb) or wb & ra:
        return True
    return any(x.amount for x in a.ether_transfers) and any(x.amount for x in b.ether_transfers)


def detect_td(ob: Observation) -> list[BugReport]:
    if ob.seed is None or len(ob.seed.txs) < 2:
        return []
    bundle = ob.bundle
    attackers = set(bundle.roles.attackers)
    attacker_addrs = bundle.attacker_addresses

    def attacker_balance(state: WorldState) -> int:
        return sum(state.balance(a) for a in attacker_addrs)

    n_acc = len(bundle.accounts)
    txs = ob.seed.txs
    for i in range(len(txs) - 1):
        a, b = txs[i], txs[i + 1]
        sa, sb = a.sender % n_acc, b.sender % n_acc
        if sa == sb or not ({sa, sb} & attackers):
            continue
        if not _may_interfere(ob.traces[i], ob.traces[i + 1]):
            continue
        shared_b = replace(b, env=a.env)
        in_order = list(txs)
        in_order[i + 1] = shared_b
        swapped = list(txs)
        swapped[i], swapped[i + 1] = shared_b, a
        r1 = execute_seed(bundle, Seed(tuple(in_order)), state=ob.pre_state)
        r2 = execute_seed(bundle, Seed(tuple(swapped)), state=ob.pre_state)
        if attacker_balance(r1.post_state) != attacker_balance(r2.post_state):
            later = ob.traces[i + 1]
            if later.branch_edges:
                addr, pc, _ = later.branch_edges[0]
            else:
                addr, pc, _ = later.instr_sites[0] if later.instr_sites else (bundle.address, 0, 0)
            return [ob.report(BugClass.TD, i + 1, addr, pc, f"window {i}-{i + 1}")]
    return []


def detect_ue(ob: Observation) -> list[BugReport]:
    return [ob.report(BugClass.UE, i, u.address, u.pc, u.kind)
            for i, t in _ok(ob.traces) for u in t.unchecked_calls]


def detect_us(ob: Observation) -> list[BugReport]:
    owner = ob.bundle.owner_address
    out = []
    for i, t in _ok(ob.traces):
        if t.sender != owner:
            for sd in t.selfdestructs:
                out.append(ob.report(BugClass.US, i, _site(t, sd.pc, (0xFF,)), sd.pc))
    return out


def detect_ud(ob: Observation) -> list[BugReport]:
    owner = ob.bundle.owner_address
    out = []
    traces = ob.traces
    for k, t in _ok(traces):
        for dc in t.delegatecalls:
            reason = None
            if dc.from_calldata:
                reason = "target from calldata"
            elif dc.storage_slot is not None:
                for j in range(k + 1):
                    tj = traces[j]
                    if tj.exception is None and tj.sender != owner and any(
                            w.address == dc.address and w.slot == dc.storage_slot
                            and (j < k or w.order < _order_of(t, dc))
                            for w in tj.storage_writes):
                        reason = f"target slot {dc.storage_slot:#x} written by unprivileged sender"
                        break
            if reason:
                out.append(ob.report(BugClass.UD, k, _site(t, dc.pc, (0xF4,)), dc.pc, reason))
    return out


def _order_of(t: ExecutionTrace, dc) -> int:
    for c in t.external_calls:
        if c.kind == "DELEGATECALL" and c.pc == dc.pc and c.target == dc.target:
            return c.start_order
    return 1 << 62


DETECTORS: dict[BugClass, Detector] = {
    BugClass.AF: detect_af,
    BugClass.BD: detect_bd,
    BugClass.IO: detect_io,
    BugClass.LE: detect_le,
    BugClass.FE: detect_fe,
    BugClass.RE: detect_re,
    BugClass.TD: detect_td,
    BugClass.UE: detect_ue,
    BugClass.US: detect_us,
    BugClass.UD: detect_ud,
}

# Detectors that re-execute the sequence; campaigns skip them once the class is known.
DIFFERENTIAL = frozenset({BugClass.BD, BugClass.TD})


def detect_all(traces: Sequence[ExecutionTrace], pre_state: WorldState, post_state: WorldState,
               bundle: Bundle, seed: Seed | None = None,
               skip: Iterable[BugClass] = ()) -> list[BugReport]:
    """Run every detector; findings are de-duplicated by (class, code address, pc)."""
    ob = Observation(traces, pre_state, post_state, bundle, seed)
    skip = set(skip)
    seen = set()
    out = []
    for cls, detector in DETECTORS.items():
        if cls in skip:
            continue
        for rep in detector(ob):
            if rep.key not in seen:
                seen.add(rep.key)
                out.append(rep)
    return out
