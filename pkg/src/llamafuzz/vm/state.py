from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .opcodes import iter_instructions

WORD_MOD = 1 << 256
WORD_MASK = WORD_MOD - 1
ADDRESS_MASK = (1 << 160) - 1


@dataclass(frozen=True)
class Bytecode:
    code: bytes
    jumpdests: frozenset[int] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        dests = frozenset(pc for pc, op, _ in iter_instructions(self.code) if op == 0x5B)
        object.__setattr__(self, "jumpdests", dests)

    @classmethod
    def from_hex(cls, text: str) -> "Bytecode":
        text = text.strip()
        if text.startswith("0x"):
            text = text[2:]
        return cls(bytes.fromhex(text))

    def __len__(self) -> int:
        return len(self.code)


@dataclass
class Account:
    balance: int = 0
    code: Bytecode | None = None
    storage: dict[int, int] = field(default_factory=dict)

    def copy(self) -> "Account":
        return Account(self.balance, self.code, dict(self.storage))


class ScriptedCall(NamedTuple):
    to: int
    calldata: bytes
    value: int


@dataclass(frozen=True)
class CounterpartyScript:
    """Calls a codeless account makes back when it receives a message call.

    ``reentry_limit`` bounds how many nested activations of the script may
    be live at once, which keeps re-entrancy loops finite.
    """

    calls: tuple[ScriptedCall, ...]
    reentry_limit: int = 1


@dataclass
class WorldState:
    accounts: dict[int, Account] = field(default_factory=dict)
    scripts: dict[int, CounterpartyScript] = field(default_factory=dict)

    def copy(self) -> "WorldState":
        return WorldState({a: acc.copy() for a, acc in self.accounts.items()}, self.scripts)

    def account(self, address: int) -> Account:
        acc = self.accounts.get(address)
        if acc is None:
            acc = self.accounts[address] = Account()
        return acc

    def balance(self, address: int) -> int:
        acc = self.accounts.get(address)
        return acc.balance if acc else 0

    def code(self, address: int) -> Bytecode | None:
        acc = self.accounts.get(address)
        return acc.code if acc else None

    def sload(self, address: int, slot: int) -> int:
        acc = self.accounts.get(address)
        return acc.storage.get(slot, 0) if acc else 0


@dataclass
class Environment:
    timestamp: int = 1_700_000_000
    block_number: int = 18_000_000
    gas_limit: int = 1_000_000
    caller: int = 0
    call_value: int = 0
    balance_overrides: dict[int, int] = field(default_factory=dict)
    call_return_override: int | None = None
    return_data_size_override: int | None = None
    ext_code_size_override: dict[int, int] = field(default_factory=dict)
