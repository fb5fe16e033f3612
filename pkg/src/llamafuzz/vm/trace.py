from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple


class Fault(str, enum.Enum):
    REVERT = "Revert"
    INVALID_OP = "InvalidOp"
    OUT_OF_GAS = "OutOfGas"
    ASSERT_FAIL = "AssertFail"
    STACK_ERR = "StackErr"


class StorageAccess(NamedTuple):
    order: int
    address: int
    slot: int
    value: int
    frame: int


class Transfer(NamedTuple):
    src: int
    dst: int
    amount: int
    pc: int | None  # None for the transaction's own value transfer


class SelfDestruct(NamedTuple):
    address: int
    beneficiary: int
    pc: int


class WrapSink(NamedTuple):
    """A value that wrapped modulo 2**256 (or overflowed a mask) reached state."""

    address: int
    arith_pc: int
    sink_pc: int
    sink: str  # "SSTORE" or "CALL"


class UncheckedCall(NamedTuple):
    address: int
    pc: int
    kind: str


class DelegateCall(NamedTuple):
    address: int
    pc: int
    target: int
    from_calldata: bool
    storage_slot: int | None  # slot the target was loaded from, when known


@dataclass
class CallRecord:
    kind: str  # CALL, DELEGATECALL, STATICCALL
    caller: int
    target: int
    value: int
    pc: int
    depth: int
    frame: int
    start_order: int
    success: bool = False
    end_order: int = -1
    reentered: bool = False

    def as_tuple(self) -> tuple:
        return (self.kind, self.caller, self.target, self.value, self.pc, self.depth,
                self.frame, self.start_order, self.success, self.end_order, self.reentered)


@dataclass
class ExecutionTrace:
    """Everything observed while executing one transaction.

    When ``exception`` is set the event lists are the prefix recorded up to
    the fault; the returned world state is the pre-state in that case.
    Effects of inner frames that failed are removed from ``storage_writes``,
    ``ether_transfers``, ``selfdestructs`` and ``wraps``.
    """

    to: int = 0
    sender: int = 0
    selector: bytes = b""
    instr_sites: list[tuple[int, int, int]] = field(default_factory=list)
    branch_edges: list[tuple[int, int, bool]] = field(default_factory=list)
    storage_writes: list[StorageAccess] = field(default_factory=list)
    storage_reads: list[StorageAccess] = field(default_factory=list)
    external_calls: list[CallRecord] = field(default_factory=list)
    ether_transfers: list[Transfer] = field(default_factory=list)
    selfdestructs: list[SelfDestruct] = field(default_factory=list)
    wraps: list[WrapSink] = field(default_factory=list)
    unchecked_calls: list[UncheckedCall] = field(default_factory=list)
    delegatecalls: list[DelegateCall] = field(default_factory=list)
    block_branches: list[tuple[int, int]] = field(default_factory=list)
    logs: int = 0
    exception: Fault | None = None
    fault_pc: int | None = None
    max_call_depth: int = 1
    gas_used: int = 0
    return_data: bytes = b""

    @property
    def ok(self) -> bool:
        return self.exception is None

    def digest(self) -> str:
        h = hashlib.sha256()
        for part in (
            self.to, self.sender, self.selector.hex(), self.instr_sites, self.branch_edges,
            self.storage_writes, self.storage_reads, [c.as_tuple() for c in self.external_calls],
            self.ether_transfers, self.selfdestructs, self.wraps, self.unchecked_calls,
            self.delegatecalls, self.block_branches, self.logs,
            self.exception.value if self.exception else None, self.fault_pc,
            self.max_call_depth, self.gas_used, self.return_data.hex(),
        ):
            h.update(repr(part).encode())
            h.update(b"|")
        return h.hexdigest()


@dataclass(frozen=True)
class BehaviorMetrics:
    d: float  # mean call depth
    r: float  # fraction of transactions with an external call
    e: int  # ether transfers
    s: int  # 1 iff a persisted SSTORE happened


def behavior_metrics(traces: list[ExecutionTrace]) -> BehaviorMetrics:
    if not traces:
        raise ValueError("behavior_metrics needs at least one trace")
    n = len(traces)
    depth = sum(t.max_call_depth for t in traces) / n
    ratio = sum(1 for t in traces if t.external_calls) / n
    transfers = sum(len(t.ether_transfers) for t in traces)
    wrote = int(any(t.storage_writes for t in traces if t.exception is None))
    return BehaviorMetrics(depth, ratio, transfers, wrote)
