"""Instrumented interpreter for the supported EVM subset.

Besides concrete semantics the interpreter keeps a light taint word next to
every stack slot. Low bits are flags (calldata, block data, call status,
storage, wrapped arithmetic); the high bits carry ``pc + 1`` of the
arithmetic instruction the value came from. Oracles read the resulting
events from the trace; the concrete behaviour never depends on taint.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

from ..crypto import keccak_int
from .opcodes import GAS_COST, OPCODES
from .state import ADDRESS_MASK, WORD_MASK, WORD_MOD, Bytecode, Environment, WorldState
from .trace import (
    CallRecord,
    DelegateCall,
    ExecutionTrace,
    Fault,
    SelfDestruct,
    StorageAccess,
    Transfer,
    UncheckedCall,
    WrapSink,
)

MAX_CALL_DEPTH = 64
MAX_STACK = 1024
MEMORY_LIMIT = 1 << 20

T_CALLDATA = 1
T_BLOCK = 2
T_WRAPPED = 4
T_STATUS = 8
T_STORAGE = 16
T_CALLVALUE = 32
FLAG_MASK = 0xFFFF
_NO_WRAP = FLAG_MASK & ~T_WRAPPED
SIGN_BIT = 1 << 255

_POPS = [OPCODES[b].pops if b in OPCODES else 0 for b in range(256)]
_GROWS = [(OPCODES[b].pushes - OPCODES[b].pops) if b in OPCODES else 0 for b in range(256)]


class UnknownOpcode(Exception):
    """An opcode outside the supported subset was executed (a bundle error)."""

    def __init__(self, address: int, pc: int, opcode: int) -> None:
        super().__init__(f"unknown opcode 0x{opcode:02x} at {address:#x}:{pc}")
        self.address = address
        self.pc = pc
        self.opcode = opcode


class _FrameFault(Exception):
    def __init__(self, kind: Fault, pc: int) -> None:
        self.kind = kind
        self.pc = pc


class Call(NamedTuple):
    """One top-level transaction as the interpreter sees it."""

    to: int
    calldata: bytes
    env: Environment


StepHook = Callable[["Frame", int, int], None]


def _join(a: int, b: int) -> int:
    if not (a or b):
        return 0
    f = (a | b) & FLAG_MASK
    if a & T_WRAPPED:
        return f | (a & ~FLAG_MASK)
    if b & T_WRAPPED:
        return f | (b & ~FLAG_MASK)
    return f


def _arith(a: int, b: int, wrapped: bool, pc: int) -> int:
    t = _join(a, b)
    if t & T_WRAPPED:
        return t
    if wrapped:
        return (t & FLAG_MASK) | T_WRAPPED | ((pc + 1) << 16)
    return (t & FLAG_MASK) | ((pc + 1) << 16)


def _signed(v: int) -> int:
    return v - WORD_MOD if v & SIGN_BIT else v


class Frame:
    __slots__ = (
        "address", "code_address", "code", "caller", "value", "calldata", "gas", "depth",
        "static", "frame_id", "memory", "stack", "tstack", "mem_taint", "returndata",
        "pending", "sload_origin", "pc",
    )

    def __init__(self, address, code_address, code: Bytecode, caller, value, calldata, gas,
                 depth, static, frame_id):
        self.address = address
        self.code_address = code_address
        self.code = code
        self.caller = caller
        self.value = value
        self.calldata = calldata
        self.gas = gas
        self.depth = depth
        self.static = static
        self.frame_id = frame_id
        self.memory = bytearray()
        self.stack: list[int] = []
        self.tstack: list[int] = []
        self.mem_taint: dict[int, int] = {}
        self.returndata = b""
        self.pending: list[tuple[int, str]] = []
        self.sload_origin: dict[int, int] = {}
        self.pc = 0


class _Tx:
    """Mutable per-transaction execution context."""

    def __init__(self, state: WorldState, env: Environment, hook: StepHook | None) -> None:
        self.state = state
        self.env = env
        self.hook = hook
        self.trace = ExecutionTrace()
        self.order = 0
        self.frames = 0
        self.active: list[CallRecord] = []
        self.stub_depth: dict[int, int] = {}

    def tick(self) -> int:
        self.order += 1
        return self.order

    # -- memory helpers -------------------------------------------------
    @staticmethod
    def _extend(f: Frame, offset: int, size: int, pc: int) -> None:
        if size == 0:
            return
        end = offset + size
        if end > MEMORY_LIMIT:
            raise _FrameFault(Fault.OUT_OF_GAS, pc)
        if end > len(f.memory):
            f.memory.extend(b"\x00" * (((end + 31) // 32) * 32 - len(f.memory)))

    @staticmethod
    def _clear_taint(f: Frame, offset: int, size: int) -> None:
        if f.mem_taint:
            for k in [k for k in f.mem_taint if k < offset + size and offset < k + 32]:
                del f.mem_taint[k]

    # -- frames ----------------------------------------------------------
    def run_frame(self, f: Frame) -> tuple[bool, bytes, Fault | None]:
        tr = self.trace
        try:
            ret = self._loop(f)
        except _FrameFault as fault:
            if f.depth == 1:
                tr.fault_pc = fault.pc
            data = f.returndata if fault.kind is Fault.REVERT else b""
            return False, data, fault.kind
        for pc, kind in f.pending:
            tr.unchecked_calls.append(UncheckedCall(f.code_address, pc, kind))
        return True, ret, None

    def _rollback(self, checkpoint: tuple[int, int, int, int]) -> None:
        tr = self.trace
        del tr.storage_writes[checkpoint[0]:]
        del tr.ether_transfers[checkpoint[1]:]
        del tr.selfdestructs[checkpoint[2]:]
        del tr.wraps[checkpoint[3]:]

    def _loop(self, f: Frame) -> bytes:  # noqa: C901 - the dispatch loop is one big switch
        code = f.code.code
        n = len(code)
        jumpdests = f.code.jumpdests
        stack = f.stack
        ts = f.tstack
        push = stack.append
        tpush = ts.append
        pop = stack.pop
        tpop = ts.pop
        env = self.env
        tr = self.trace
        sites = tr.instr_sites
        edges = tr.branch_edges
        state = self.state
        caddr = f.code_address
        hook = self.hook
        gas = f.gas
        pc = 0
        try:
            while True:
                if pc >= n:
                    return b""
                op = code[pc]
                cost = GAS_COST[op]
                if cost == 0:
                    raise UnknownOpcode(caddr, pc, op)
                if cost > gas:
                    raise _FrameFault(Fault.OUT_OF_GAS, pc)
                gas -= cost
                sites.append((caddr, pc, op))
                depth = len(stack)
                if depth < _POPS[op] or depth + _GROWS[op] > MAX_STACK:
                    raise _FrameFault(Fault.STACK_ERR, pc)
                if hook is not None:
                    f.gas = gas
                    f.pc = pc
                    hook(f, pc, op)

                if op >= 0x60:
                    if op <= 0x7F:
                        w = op - 0x5F
                        push(int.from_bytes(code[pc + 1:pc + 1 + w].ljust(w, b"\x00"), "big"))
                        tpush(0)
                        pc += 1 + w
                        continue
                    if op <= 0x8F:
                        k = op - 0x7F
                        push(stack[-k])
                        tpush(ts[-k])
                        pc += 1
                        continue
                    if op <= 0x9F:
                        k = op - 0x8E
                        stack[-1], stack[-k] = stack[-k], stack[-1]
                        ts[-1], ts[-k] = ts[-k], ts[-1]
                        pc += 1
                        continue
                    if op <= 0xA4:
                        topics = op - 0xA0
                        if f.static:
                            raise _FrameFault(Fault.INVALID_OP, pc)
                        off = pop(); size = pop()
                        tpop(); tpop()
                        for _ in range(topics):
                            pop(); tpop()
                        self._extend(f, off, size, pc)
                        tr.logs += 1
                        pc += 1
                        continue
                    # calls and halting instructions
                    if op == 0xF1 or op == 0xF4 or op == 0xFA:
                        f.gas = gas
                        self._call(f, op, pc)
                        gas = f.gas
                        pc += 1
                        continue
                    if op == 0xF3 or op == 0xFD:
                        off = pop(); size = pop()
                        tpop(); tpop()
                        self._extend(f, off, size, pc)
                        data = bytes(f.memory[off:off + size]) if size else b""
                        if op == 0xF3:
                            return data
                        f.returndata = data
                        raise _FrameFault(Fault.REVERT, pc)
                    if op == 0xFE:
                        raise _FrameFault(Fault.ASSERT_FAIL, pc)
                    if op == 0xFF:
                        if f.static:
                            raise _FrameFault(Fault.INVALID_OP, pc)
                        beneficiary = pop() & ADDRESS_MASK
                        tpop()
                        acc = state.account(f.address)
                        amount = acc.balance
                        acc.balance = 0
                        if beneficiary != f.address:
                            state.account(beneficiary).balance += amount
                        if amount:
                            tr.ether_transfers.append(Transfer(f.address, beneficiary, amount, pc))
                        tr.selfdestructs.append(SelfDestruct(f.address, beneficiary, pc))
                        return b""
                    raise UnknownOpcode(caddr, pc, op)

                if op == 0x5B:  # JUMPDEST
                    pc += 1
                    continue
                if op == 0x56:  # JUMP
                    dest = pop(); tpop()
                    if dest not in jumpdests:
                        raise _FrameFault(Fault.INVALID_OP, pc)
                    pc = dest
                    continue
                if op == 0x57:  # JUMPI
                    dest = pop(); cond = pop()
                    tpop(); tc = tpop()
                    taken = cond != 0
                    edges.append((caddr, pc, taken))
                    if tc:
                        if tc & T_BLOCK:
                            tr.block_branches.append((caddr, pc))
                        if tc & T_STATUS:
                            f.pending.clear()
                    if taken:
                        if dest not in jumpdests:
                            raise _FrameFault(Fault.INVALID_OP, pc)
                        pc = dest
                    else:
                        pc += 1
                    continue
                if op == 0x50:  # POP
                    pop(); tpop()
                    pc += 1
                    continue

                if op < 0x20:
                    if op == 0x00:
                        return b""
                    if op == 0x15:  # ISZERO
                        stack[-1] = 1 if stack[-1] == 0 else 0
                        if ts[-1]:
                            ts[-1] = ts[-1] & _NO_WRAP
                        pc += 1
                        continue
                    if op == 0x19:  # NOT
                        stack[-1] = WORD_MASK ^ stack[-1]
                        pc += 1
                        continue
                    a = pop(); b = pop()
                    ta = tpop(); tb = tpop()
                    if op == 0x01:
                        r = a + b
                        push(r & WORD_MASK)
                        tpush(_arith(ta, tb, r > WORD_MASK, pc))
                    elif op == 0x03:
                        push((a - b) & WORD_MASK)
                        tpush(_arith(ta, tb, a < b, pc))
                    elif op == 0x02:
                        r = a * b
                        push(r & WORD_MASK)
                        tpush(_arith(ta, tb, r > WORD_MASK, pc))
                    elif op == 0x16:  # AND
                        push(a & b)
                        t = _join(ta, tb) if (ta or tb) else 0
                        if tb >> 16 and not tb & T_WRAPPED and a and (a & (a + 1)) == 0 and b > a:
                            t = t | T_WRAPPED | (tb & ~FLAG_MASK)
                        elif ta >> 16 and not ta & T_WRAPPED and b and (b & (b + 1)) == 0 and a > b:
                            t = t | T_WRAPPED | (ta & ~FLAG_MASK)
                        tpush(t)
                    elif op == 0x14:
                        push(1 if a == b else 0)
                        tpush(_join(ta, tb) & _NO_WRAP if (ta or tb) else 0)
                    elif op == 0x10:
                        push(1 if a < b else 0)
                        tpush(_join(ta, tb) & _NO_WRAP if (ta or tb) else 0)
                    elif op == 0x11:
                        push(1 if a > b else 0)
                        tpush(_join(ta, tb) & _NO_WRAP if (ta or tb) else 0)
                    elif op == 0x12:
                        push(1 if _signed(a) < _signed(b) else 0)
                        tpush(_join(ta, tb) & _NO_WRAP if (ta or tb) else 0)
                    elif op == 0x13:
                        push(1 if _signed(a) > _signed(b) else 0)
                        tpush(_join(ta, tb) & _NO_WRAP if (ta or tb) else 0)
                    elif op == 0x1C:  # SHR: shift, value
                        push(b >> a if a < 256 else 0)
                        tpush(_join(ta, tb))
                    elif op == 0x1B:
                        push((b << a) & WORD_MASK if a < 256 else 0)
                        tpush(_join(ta, tb))
                    elif op == 0x17:
                        push(a | b)
                        tpush(_join(ta, tb))
                    elif op == 0x18:
                        push(a ^ b)
                        tpush(_join(ta, tb))
                    elif op == 0x04:
                        push(a // b if b else 0)
                        tpush(_join(ta, tb))
                    elif op == 0x06:
                        push(a % b if b else 0)
                        tpush(_join(ta, tb))
                    elif op == 0x05:
                        if b == 0:
                            push(0)
                        else:
                            sa, sb = _signed(a), _signed(b)
                            q = abs(sa) // abs(sb)
                            push((-q if (sa < 0) != (sb < 0) else q) & WORD_MASK)
                        tpush(_join(ta, tb))
                    elif op == 0x0A:
                        push(pow(a, b, WORD_MOD))
                        tpush(_join(ta, tb))
                    elif op == 0x1A:  # BYTE: index, value
                        push((b >> (8 * (31 - a))) & 0xFF if a < 32 else 0)
                        tpush(_join(ta, tb))
                    else:
                        raise UnknownOpcode(caddr, pc, op)
                    pc += 1
                    continue

                # 0x20 .. 0x5A
                if op == 0x51:  # MLOAD
                    off = stack[-1]
                    self._extend(f, off, 32, pc)
                    stack[-1] = int.from_bytes(f.memory[off:off + 32], "big")
                    ts[-1] = f.mem_taint.get(off, 0) if f.mem_taint else 0
                elif op == 0x52:  # MSTORE
                    off = pop(); v = pop()
                    tpop(); tv = tpop()
                    self._extend(f, off, 32, pc)
                    f.memory[off:off + 32] = v.to_bytes(32, "big")
                    self._clear_taint(f, off, 32)
                    if tv:
                        f.mem_taint[off] = tv
                        if tv & T_STATUS:
                            f.pending.clear()
                elif op == 0x35:  # CALLDATALOAD
                    off = stack[-1]
                    cd = f.calldata
                    stack[-1] = int.from_bytes(cd[off:off + 32].ljust(32, b"\x00"), "big") if off < len(cd) else 0
                    ts[-1] = T_CALLDATA
                elif op == 0x54:  # SLOAD
                    slot = stack[-1]
                    acc = state.accounts.get(f.address)
                    v = acc.storage.get(slot, 0) if acc else 0
                    stack[-1] = v
                    ts[-1] = T_STORAGE
                    f.sload_origin[v] = slot
                    self.order += 1
                    tr.storage_reads.append(StorageAccess(self.order, f.address, slot, v, f.frame_id))
                elif op == 0x55:  # SSTORE
                    if f.static:
                        raise _FrameFault(Fault.INVALID_OP, pc)
                    slot = pop(); v = pop()
                    tpop(); tv = tpop()
                    acc = state.account(f.address)
                    if v:
                        acc.storage[slot] = v
                    else:
                        acc.storage.pop(slot, None)
                    self.order += 1
                    tr.storage_writes.append(StorageAccess(self.order, f.address, slot, v, f.frame_id))
                    if tv:
                        if tv & T_WRAPPED:
                            tr.wraps.append(WrapSink(caddr, (tv >> 16) - 1, pc, "SSTORE"))
                        if tv & T_STATUS:
                            f.pending.clear()
                elif op == 0x20:  # KECCAK256
                    off = pop(); size = pop()
                    tpop(); tpop()
                    self._extend(f, off, size, pc)
                    push(keccak_int(bytes(f.memory[off:off + size])))
                    t = 0
                    if f.mem_taint:
                        for k, tk in f.mem_taint.items():
                            if off <= k < off + size:
                                t |= tk
                    tpush(t & _NO_WRAP)
                elif op == 0x33:
                    push(f.caller); tpush(0)
                elif op == 0x34:
                    push(f.value); tpush(T_CALLVALUE)
                elif op == 0x36:
                    push(len(f.calldata)); tpush(0)
                elif op == 0x30:
                    push(f.address); tpush(0)
                elif op == 0x32:
                    push(env.caller); tpush(0)
                elif op == 0x42:
                    push(env.timestamp); tpush(T_BLOCK)
                elif op == 0x43:
                    push(env.block_number); tpush(T_BLOCK)
                elif op == 0x45:
                    push(env.gas_limit); tpush(0)
                elif op == 0x58:
                    push(pc); tpush(0)
                elif op == 0x5A:
                    push(gas); tpush(0)
                elif op == 0x31:  # BALANCE
                    a = stack[-1] & ADDRESS_MASK
                    ov = env.balance_overrides
                    stack[-1] = ov[a] if a in ov else state.balance(a)
                    ts[-1] = 0
                elif op == 0x3B:  # EXTCODESIZE
                    a = stack[-1] & ADDRESS_MASK
                    ov = env.ext_code_size_override
                    if a in ov:
                        stack[-1] = ov[a]
                    else:
                        c = state.code(a)
                        stack[-1] = len(c) if c else 0
                    ts[-1] = 0
                elif op == 0x3D:
                    rds = env.return_data_size_override
                    push(len(f.returndata) if rds is None else rds); tpush(0)
                elif op == 0x37 or op == 0x3E:  # CALLDATACOPY / RETURNDATACOPY
                    moff = pop(); doff = pop(); size = pop()
                    tpop(); tpop(); tpop()
                    src = f.calldata if op == 0x37 else f.returndata
                    if op == 0x3E and doff + size > len(src):
                        raise _FrameFault(Fault.INVALID_OP, pc)
                    self._extend(f, moff, size, pc)
                    if size:
                        chunk = src[doff:doff + size] if doff < len(src) else b""
                        f.memory[moff:moff + size] = chunk.ljust(size, b"\x00")
                        self._clear_taint(f, moff, size)
                        if op == 0x37:
                            for k in range(moff, moff + size, 32):
                                f.mem_taint[k] = T_CALLDATA
                elif op == 0x53:  # MSTORE8
                    off = pop(); v = pop()
                    tpop(); tpop()
                    self._extend(f, off, 1, pc)
                    f.memory[off] = v & 0xFF
                    self._clear_taint(f, off, 1)
                else:
                    raise UnknownOpcode(caddr, pc, op)
                pc += 1
        finally:
            f.gas = gas
            f.pc = pc

    # -- message calls ---------------------------------------------------
    def _call(self, f: Frame, op: int, pc: int) -> None:
        stack = f.stack
        ts = f.tstack
        gas_arg = stack.pop(); ts.pop()
        to = stack.pop() & ADDRESS_MASK
        t_to = ts.pop()
        if op == 0xF1:
            value = stack.pop()
            t_value = ts.pop()
        else:
            value, t_value = 0, 0
        in_off = stack.pop(); in_size = stack.pop(); out_off = stack.pop(); out_size = stack.pop()
        del ts[-4:]
        kind = "CALL" if op == 0xF1 else ("DELEGATECALL" if op == 0xF4 else "STATICCALL")
        if op == 0xF1 and value and f.static:
            raise _FrameFault(Fault.INVALID_OP, pc)
        self._extend(f, in_off, in_size, pc)
        self._extend(f, out_off, out_size, pc)
        if t_value & T_WRAPPED:
            self.trace.wraps.append(WrapSink(f.code_address, (t_value >> 16) - 1, pc, "CALL"))
        if op == 0xF4:
            slot = f.sload_origin.get(to) if t_to & T_STORAGE else None
            self.trace.delegatecalls.append(
                DelegateCall(f.address, pc, to, bool(t_to & T_CALLDATA), slot))
        data = bytes(f.memory[in_off:in_off + in_size]) if in_size else b""
        if op == 0xF4:
            ok, ret, used, _ = self.message(
                kind, f.caller, f.address, 0, data, min(gas_arg, f.gas), f.depth + 1,
                f.static, pc, f, code_address=to, ctx_value=f.value)
        else:
            ok, ret, used, _ = self.message(
                kind, f.address, to, value, data, min(gas_arg, f.gas), f.depth + 1,
                f.static or op == 0xFA, pc, f)
        f.gas -= used
        status = 1 if ok else 0
        override = self.env.call_return_override
        if override is not None:
            status = override & WORD_MASK
        f.stack.append(status)
        f.tstack.append(T_STATUS)
        if status == 0:
            f.pending.append((pc, kind))
        f.returndata = ret
        if out_size and ret:
            k = min(out_size, len(ret))
            f.memory[out_off:out_off + k] = ret[:k]
            self._clear_taint(f, out_off, k)

    def message(self, kind: str, sender: int, to: int, value: int, data: bytes, gas: int,
                depth: int, static: bool, pc: int | None, parent: Frame | None,
                code_address: int | None = None, ctx_value: int | None = None
                ) -> tuple[bool, bytes, int, CallRecord | None]:
        """Run one message call; returns (success, return data, gas used, record).

        ``parent`` is None for the top-level transaction, whose value transfer
        and rollback are handled by ``execute_transaction``.
        """
        tr = self.trace
        state = self.state
        record = None
        if parent is not None:
            record = CallRecord(kind, parent.address, code_address if code_address is not None else to,
                                value, pc, depth, parent.frame_id, self.tick())
            tr.external_calls.append(record)
            if depth > MAX_CALL_DEPTH or state.balance(parent.address) < value:
                record.end_order = self.tick()
                return False, b"", 0, record
        if depth > tr.max_call_depth:
            tr.max_call_depth = depth
        snapshot = state.copy() if parent is not None else None
        checkpoint = (len(tr.storage_writes), len(tr.ether_transfers), len(tr.selfdestructs),
                      len(tr.wraps))
        if parent is not None and value:
            state.account(parent.address).balance -= value
            state.account(to).balance += value
            tr.ether_transfers.append(Transfer(parent.address, to, value, pc))

        code = state.code(code_address if code_address is not None else to)
        used = 0
        ok = True
        ret = b""
        if code is not None and len(code):
            self.frames += 1
            frame = Frame(to, code_address if code_address is not None else to, code, sender,
                          value if ctx_value is None else ctx_value, data, gas, depth, static,
                          self.frames)
            if record is not None:
                self.active.append(record)
            try:
                ok, ret, _fault = self.run_frame(frame)
            finally:
                if record is not None:
                    self.active.pop()
            used = gas - frame.gas
            if ok and kind != "DELEGATECALL":
                for outer in self.active:
                    if outer.caller == to and outer.kind == "CALL":
                        outer.reentered = True
        elif to in state.scripts and kind == "CALL" and not static:
            used = self._run_script(to, gas, depth, record)

        if parent is not None:
            override = self.env.call_return_override
            if override is not None and override & WORD_MASK == 0:
                ok = False
            if not ok:
                state.accounts = snapshot.accounts
                self._rollback(checkpoint)
            record.success = ok
            if not ok:
                record.reentered = False
            record.end_order = self.tick()
        return ok, ret, used, record

    def _run_script(self, who: int, gas: int, depth: int, record: CallRecord | None) -> int:
        script = self.state.scripts[who]
        live = self.stub_depth.get(who, 0)
        if live >= script.reentry_limit:
            return 0
        self.stub_depth[who] = live + 1
        if record is not None:
            self.active.append(record)
        used = 0
        pseudo = Frame(who, who, Bytecode(b""), 0, 0, b"", gas, depth, False, 0)
        try:
            for call in script.calls:
                remaining = gas - used
                if remaining <= 0:
                    break
                _, _, u, _ = self.message("CALL", who, call.to, call.value, call.calldata,
                                          remaining, depth + 1, False, None, pseudo)
                used += u
        finally:
            self.stub_depth[who] = live
            if record is not None:
                self.active.pop()
        return used


def execute_transaction(state: WorldState, to: int, calldata: bytes, env: Environment,
                        hook: StepHook | None = None) -> tuple[ExecutionTrace, WorldState]:
    """Execute one transaction; never mutates ``state``.

    On any fault the returned state is ``state`` itself (all effects rolled
    back). Raises ``UnknownOpcode`` for bytes outside the supported subset.
    """
    if env.gas_limit <= 0:
        raise ValueError("gas_limit must be positive")
    work = state.copy()
    ctx = _Tx(work, env, hook)
    tr = ctx.trace
    tr.to = to
    tr.sender = env.caller
    tr.selector = calldata[:4]
    value = env.call_value
    if work.balance(env.caller) < value:
        tr.exception = Fault.REVERT
        return tr, state
    if value:
        work.account(env.caller).balance -= value
        work.account(to).balance += value
        tr.ether_transfers.append(Transfer(env.caller, to, value, None))
    code = work.code(to)
    if code is None or not len(code):
        return tr, work
    ctx.frames += 1
    frame = Frame(to, to, code, env.caller, value, calldata, env.gas_limit, 1, False, ctx.frames)
    ok, ret, fault = ctx.run_frame(frame)
    tr.gas_used = env.gas_limit - frame.gas
    tr.return_data = ret
    if not ok:
        tr.exception = fault
        return tr, state
    for sd in tr.selfdestructs:
        acc = work.account(sd.address)
        acc.code = None
        acc.storage = {}
        acc.balance = 0
    return tr, work


def execute_sequence(state0: WorldState, seq: list[Call],
                     hook: StepHook | None = None) -> tuple[list[ExecutionTrace], WorldState]:
    if not seq:
        raise ValueError("execute_sequence needs at least one transaction")
    state = state0
    traces = []
    for call in seq:
        trace, state = execute_transaction(state, call.to, call.calldata, call.env, hook)
        traces.append(trace)
    return traces, state
