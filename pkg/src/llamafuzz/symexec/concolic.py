"""Concolic re-execution: concrete run shadowed by symbolic expressions.

Symbolic sources per transaction ``t``: scalar calldata arguments
(``tx{t}.arg{i}``), ``tx{t}.timestamp``, ``tx{t}.number`` and, for payable
functions, ``tx{t}.callvalue``. Storage, balances, call results and any
operation the expression language does not model are concrete: their
result simply carries no symbolic shadow, so the symbolic path always
coincides with the concrete one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..abi import AbiType
from ..bundle import Bundle
from ..corpus import Seed, to_calls
from ..vm import Frame, WorldState, execute_transaction
from ..vm.opcodes import OPCODES
from .expr import Builder, Expr, const

MAX_TIMESTAMP = (1 << 64) - 1

_BINOPS = {
    0x01: "add", 0x02: "mul", 0x03: "sub", 0x04: "div", 0x05: "sdiv", 0x06: "mod",
    0x10: "lt", 0x11: "gt", 0x12: "slt", 0x13: "sgt", 0x14: "eq",
    0x16: "and", 0x17: "or", 0x18: "xor", 0x1A: "byte", 0x1B: "shl", 0x1C: "shr",
}
_UNOPS = {0x15: "iszero", 0x19: "not"}
_POPS = {code: info.pops for code, info in OPCODES.items()}
_PUSHES = {code: info.pushes for code, info in OPCODES.items()}


@dataclass(frozen=True)
class Branch:
    tx: int
    address: int  # code address of the JUMPI
    pc: int
    predicate: Expr | None  # None: condition did not depend on symbolic inputs
    taken: bool

    @property
    def edge(self) -> tuple[int, int, bool]:
        return (self.address, self.pc, self.taken)

    @property
    def flipped_edge(self) -> tuple[int, int, bool]:
        return (self.address, self.pc, not self.taken)


@dataclass
class PathConstraint:
    branches: list[Branch] = field(default_factory=list)
    values: dict[str, int] = field(default_factory=dict)  # concrete value of every symbol
    domains: dict[str, tuple[int, int]] = field(default_factory=dict)
    nodes: int = 0

    def __len__(self) -> int:
        return len(self.branches)

    def __getitem__(self, i: int) -> Branch:
        return self.branches[i]


def _arg_domain(t: AbiType) -> tuple[int, int] | None:
    if t.kind == "uint":
        return (0, t.max_value)
    if t.kind == "address":
        return (0, (1 << 160) - 1)
    if t.kind == "bool":
        return (0, 1)
    if t.kind == "int" and t.bits == 256:
        return (0, (1 << 256) - 1)
    return None


def symbolic_arguments(types: tuple[AbiType, ...]) -> dict[int, tuple[int, tuple[int, int]]]:
    """Calldata offset -> (argument index, domain) for every symbolic head word."""
    out = {}
    offset = 4
    for i, t in enumerate(types):
        dom = _arg_domain(t)
        if dom is not None:
            out[offset] = (i, dom)
        offset += t.head_size
    return out


def _word_value(t: AbiType, v) -> int:
    if t.kind == "bool":
        return int(bool(v))
    return v % (1 << 256)


class _Shadow:
    def __init__(self, builder: Builder, pc: PathConstraint) -> None:
        self.b = builder
        self.pc = pc
        self.frames: dict[int, tuple[list, dict]] = {}
        self.tx = 0
        self.args: dict[int, str] = {}
        self.callvalue: str | None = None

    def begin(self, tx: int, args: dict[int, str], callvalue: str | None) -> None:
        self.tx = tx
        self.frames = {}
        self.args = args
        self.callvalue = callvalue

    def _frame(self, f: Frame) -> tuple[list, dict]:
        entry = self.frames.get(f.frame_id)
        if entry is None:
            entry = ([], {})
            self.frames[f.frame_id] = entry
        stack = entry[0]
        n = len(f.stack)
        if len(stack) != n:  # resynchronise defensively (bottom is concrete)
            del stack[:max(0, len(stack) - n)]
            stack[:0] = [None] * (n - len(stack))
        return entry

    @staticmethod
    def _clear(mem: dict, off: int, size: int) -> None:
        if mem and size:
            for k in [k for k in mem if k < off + size and off < k + 32]:
                del mem[k]

    def __call__(self, f: Frame, pc: int, op: int) -> None:  # noqa: C901 - opcode switch
        stack, mem = self._frame(f)
        cs = f.stack
        if 0x60 <= op <= 0x7F:
            stack.append(None)
            return
        if 0x80 <= op <= 0x8F:
            stack.append(stack[-(op - 0x7F)])
            return
        if 0x90 <= op <= 0x9F:
            k = op - 0x8E
            stack[-1], stack[-k] = stack[-k], stack[-1]
            return
        name = _BINOPS.get(op)
        if name is not None:
            a, b = stack.pop(), stack.pop()
            if a is None and b is None:
                stack.append(None)
            else:
                stack.append(self.b.op(name, a if a is not None else const(cs[-1]),
                                       b if b is not None else const(cs[-2])))
            return
        name = _UNOPS.get(op)
        if name is not None:
            a = stack.pop()
            stack.append(None if a is None else self.b.op(name, a))
            return
        if op == 0x57:  # JUMPI
            stack.pop()
            cond = stack.pop()
            if cond is not None and cond[0] == "const":
                cond = None
            self.pc.branches.append(Branch(self.tx, f.code_address, pc, cond, cs[-2] != 0))
            return
        if op == 0x35:  # CALLDATALOAD
            stack.pop()
            name = self.args.get(cs[-1]) if f.depth == 1 else None
            stack.append(self.b.sym(name) if name else None)
            return
        if op == 0x42 or op == 0x43:  # block data is transaction-wide
            stack.append(self.b.sym(f"tx{self.tx}.{'timestamp' if op == 0x42 else 'number'}"))
            return
        if op == 0x34:
            stack.append(self.b.sym(self.callvalue) if self.callvalue and f.depth == 1 else None)
            return
        if op == 0x51:  # MLOAD
            stack.pop()
            stack.append(mem.get(cs[-1]))
            return
        if op == 0x52:  # MSTORE
            stack.pop()
            v = stack.pop()
            off = cs[-1]
            self._clear(mem, off, 32)
            if v is not None:
                mem[off] = v
            return
        if op == 0x53:  # MSTORE8
            stack.pop(); stack.pop()
            self._clear(mem, cs[-1], 1)
            return
        if op == 0x37 or op == 0x3E:  # CALLDATACOPY / RETURNDATACOPY
            del stack[-3:]
            self._clear(mem, cs[-1], cs[-3])
            return
        if op == 0x20:  # KECCAK256
            stack.pop(); stack.pop()
            stack.append(self._keccak(f, mem, cs[-1], cs[-2]))
            return
        if op == 0xF1 or op == 0xF4 or op == 0xFA:
            n = _POPS[op]
            out_off, out_size = (cs[-6], cs[-7]) if op == 0xF1 else (cs[-5], cs[-6])
            del stack[-n:]
            self._clear(mem, out_off, out_size)
            stack.append(None)
            return
        n = _POPS.get(op, 0)
        if n:
            del stack[-n:]
        if _PUSHES.get(op, 0):
            stack.append(None)

    def _keccak(self, f: Frame, mem: dict, off: int, size: int) -> Expr | None:
        if not mem or not any(off <= k and k + 32 <= off + size for k in mem):
            return None
        parts: list = []
        raw = bytearray()
        p, end = off, off + size
        memory = f.memory
        while p < end:
            e = mem.get(p)
            if e is not None and p + 32 <= end:
                if raw:
                    parts.append(bytes(raw))
                    raw = bytearray()
                parts.append(e)
                p += 32
            else:
                raw.append(memory[p] if p < len(memory) else 0)
                p += 1
        if raw:
            parts.append(bytes(raw))
        return self.b.keccak(tuple(parts))


def collect_constraints(bundle: Bundle, seed: Seed, node_budget: int = 100_000,
                        state: WorldState | None = None) -> PathConstraint:
    """Re-execute ``seed`` concolically; one entry per executed JUMPI, in trace order.

    Raises ``SymbolicBudgetExceeded`` when expressions outgrow ``node_budget``.
    """
    builder = Builder(node_budget)
    pcons = PathConstraint()
    shadow = _Shadow(builder, pcons)
    st = state if state is not None else bundle.initial_state()
    for t, (tx, call) in enumerate(zip(seed.txs, to_calls(bundle, seed))):
        fd = bundle.function(tx.function)
        args = {}
        for off, (i, dom) in symbolic_arguments(fd.inputs).items():
            name = f"tx{t}.arg{i}"
            args[off] = name
            pcons.values[name] = _word_value(fd.inputs[i], tx.args[i])
            pcons.domains[name] = dom
        for leaf, v in (("timestamp", tx.env.timestamp), ("number", tx.env.block_number)):
            pcons.values[f"tx{t}.{leaf}"] = v
            pcons.domains[f"tx{t}.{leaf}"] = (0, MAX_TIMESTAMP)
        cv = None
        if fd.payable:
            cv = f"tx{t}.callvalue"
            pcons.values[cv] = tx.value
            pcons.domains[cv] = (0, bundle.account_balance)
        shadow.begin(t, args, cv)
        _, st = execute_transaction(st, call.to, call.calldata, call.env, shadow)
    pcons.nodes = builder.nodes
    return pcons
