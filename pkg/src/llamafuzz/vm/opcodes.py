"""Opcode table for the supported EVM subset.

Every byte value not listed here raises ``UnknownOpcode`` when executed.
Gas follows the simplified schedule: 1 per instruction, 20 per SLOAD,
100 per SSTORE and per CALL-family instruction.
"""

from __future__ import annotations

from typing import NamedTuple


class OpInfo(NamedTuple):
    code: int
    name: str
    pops: int
    pushes: int
    gas: int


_TABLE: list[tuple[int, str, int, int]] = [
    (0x00, "STOP", 0, 0),
    (0x01, "ADD", 2, 1),
    (0x02, "MUL", 2, 1),
    (0x03, "SUB", 2, 1),
    (0x04, "DIV", 2, 1),
    (0x05, "SDIV", 2, 1),
    (0x06, "MOD", 2, 1),
    (0x0A, "EXP", 2, 1),
    (0x10, "LT", 2, 1),
    (0x11, "GT", 2, 1),
    (0x12, "SLT", 2, 1),
    (0x13, "SGT", 2, 1),
    (0x14, "EQ", 2, 1),
    (0x15, "ISZERO", 1, 1),
    (0x16, "AND", 2, 1),
    (0x17, "OR", 2, 1),
    (0x18, "XOR", 2, 1),
    (0x19, "NOT", 1, 1),
    (0x1A, "BYTE", 2, 1),
    (0x1B, "SHL", 2, 1),
    (0x1C, "SHR", 2, 1),
    (0x20, "KECCAK256", 2, 1),
    (0x30, "ADDRESS", 0, 1),
    (0x31, "BALANCE", 1, 1),
    (0x32, "ORIGIN", 0, 1),
    (0x33, "CALLER", 0, 1),
    (0x34, "CALLVALUE", 0, 1),
    (0x35, "CALLDATALOAD", 1, 1),
    (0x36, "CALLDATASIZE", 0, 1),
    (0x37, "CALLDATACOPY", 3, 0),
    (0x3B, "EXTCODESIZE", 1, 1),
    (0x3D, "RETURNDATASIZE", 0, 1),
    (0x3E, "RETURNDATACOPY", 3, 0),
    (0x42, "TIMESTAMP", 0, 1),
    (0x43, "NUMBER", 0, 1),
    (0x45, "GASLIMIT", 0, 1),
    (0x50, "POP", 1, 0),
    (0x51, "MLOAD", 1, 1),
    (0x52, "MSTORE", 2, 0),
    (0x53, "MSTORE8", 2, 0),
    (0x54, "SLOAD", 1, 1),
    (0x55, "SSTORE", 2, 0),
    (0x56, "JUMP", 1, 0),
    (0x57, "JUMPI", 2, 0),
    (0x58, "PC", 0, 1),
    (0x5A, "GAS", 0, 1),
    (0x5B, "JUMPDEST", 0, 0),
    (0xA0, "LOG0", 2, 0),
    (0xA1, "LOG1", 3, 0),
    (0xA2, "LOG2", 4, 0),
    (0xA3, "LOG3", 5, 0),
    (0xA4, "LOG4", 6, 0),
    (0xF1, "CALL", 7, 1),
    (0xF3, "RETURN", 2, 0),
    (0xF4, "DELEGATECALL", 6, 1),
    (0xFA, "STATICCALL", 6, 1),
    (0xFD, "REVERT", 2, 0),
    (0xFE, "INVALID", 0, 0),
    (0xFF, "SELFDESTRUCT", 1, 0),
]

_GAS = {"SLOAD": 20, "SSTORE": 100, "CALL": 100, "DELEGATECALL": 100, "STATICCALL": 100}

OPCODES: dict[int, OpInfo] = {}
for _code, _name, _pops, _pushes in _TABLE:
    OPCODES[_code] = OpInfo(_code, _name, _pops, _pushes, _GAS.get(_name, 1))
for _i in range(32):
    OPCODES[0x60 + _i] = OpInfo(0x60 + _i, f"PUSH{_i + 1}", 0, 1, 1)
for _i in range(16):
    OPCODES[0x80 + _i] = OpInfo(0x80 + _i, f"DUP{_i + 1}", _i + 1, _i + 2, 1)
    OPCODES[0x90 + _i] = OpInfo(0x90 + _i, f"SWAP{_i + 1}", _i + 2, _i + 2, 1)

BY_NAME: dict[str, OpInfo] = {info.name: info for info in OPCODES.values()}

# Per-byte gas lookup, 0 for unsupported bytes.
GAS_COST: list[int] = [OPCODES[b].gas if b in OPCODES else 0 for b in range(256)]

CALL_FAMILY = frozenset({0xF1, 0xF4, 0xFA})
VALUE_SENDING = frozenset({0xF1, 0xF4, 0xFF})


def name_of(code: int) -> str:
    info = OPCODES.get(code)
    return info.name if info else f"0x{code:02x}"


def iter_instructions(code: bytes):
    """Yield ``(pc, opcode, immediate)`` by linear sweep, skipping PUSH data."""
    pc = 0
    n = len(code)
    while pc < n:
        op = code[pc]
        if 0x60 <= op <= 0x7F:
            width = op - 0x5F
            yield pc, op, int.from_bytes(code[pc + 1 : pc + 1 + width].ljust(width, b"\x00"), "big")
            pc += 1 + width
        else:
            yield pc, op, None
            pc += 1
