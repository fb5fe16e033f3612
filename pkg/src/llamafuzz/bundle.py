"""Contract bundles: prebuilt bytecode + ABI + roles + optional counterparty.

A bundle directory contains::

    code.bin            hex-encoded runtime bytecode
    abi.json            contract ABI
    roles.json          {"owner": <account index>, "attackers": [<index>, ...]}
    state.json          optional {"balance": wei, "storage": {slot: value}}
    attacker.json       optional scripted counterparty (see below)
    expected_bugs.json  optional list of bug classes the bundle is seeded with
    source.easm         optional assembly source that code.bin was built from

``attacker.json`` has the form ``{"account": 2, "reentry_limit": 1,
"calls": [{"function": "withdraw()", "args": [], "value": 0}]}``; the
calls target the bundle's contract. The account with that index is codeless
and runs the script whenever it receives a message call.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .abi import AbiError, FunctionDescriptor, RawCall, ValidatedCall, parse_abi, validate_call
from .vm.state import Account, Bytecode, CounterpartyScript, ScriptedCall, WorldState

ETHER = 10**18
CONTRACT_ADDRESS = 0xC0FFEE
DEFAULT_ACCOUNTS: tuple[int, ...] = (
    0x00000000000000000000000000000000000000A1,  # owner / deployer
    0x00000000000000000000000000000000000000B2,  # ordinary user
    0x00000000000000000000000000000000000000C3,  # attacker
)
DEFAULT_ACCOUNT_BALANCE = 100 * ETHER
BASE_TIMESTAMP = 1_700_000_000
BASE_BLOCK = 18_000_000
BLOCK_INTERVAL = 12
DEFAULT_GAS = 1_000_000


class BundleError(Exception):
    pass


@dataclass(frozen=True)
class Roles:
    owner: int = 0
    attackers: tuple[int, ...] = (2,)


@dataclass
class Bundle:
    name: str
    code: Bytecode
    abi: list[FunctionDescriptor]
    roles: Roles = field(default_factory=Roles)
    address: int = CONTRACT_ADDRESS
    accounts: tuple[int, ...] = DEFAULT_ACCOUNTS
    account_balance: int = DEFAULT_ACCOUNT_BALANCE
    contract_balance: int = 0
    storage: dict[int, int] = field(default_factory=dict)
    attacker: dict | None = None
    expected_bugs: tuple[str, ...] | None = None
    path: Path | None = None

    def __post_init__(self) -> None:
        if not len(self.code):
            raise BundleError(f"{self.name}: empty bytecode")
        n = len(self.accounts)
        if not 0 <= self.roles.owner < n or any(not 0 <= a < n for a in self.roles.attackers):
            raise BundleError(f"{self.name}: role index outside the account set")
        self._by_sig = {fd.signature: fd for fd in self.abi}
        self._script = self._build_script() if self.attacker else None

    # -- functions ------------------------------------------------------------
    def function(self, signature: str) -> FunctionDescriptor:
        try:
            return self._by_sig[signature]
        except KeyError:
            raise BundleError(f"{self.name}: no function {signature}") from None

    def has_function(self, signature: str) -> bool:
        return signature in self._by_sig

    @property
    def attacker_addresses(self) -> frozenset[int]:
        return frozenset(self.accounts[i] for i in self.roles.attackers)

    @property
    def owner_address(self) -> int:
        return self.accounts[self.roles.owner]

    def _resolve(self, ref: str) -> FunctionDescriptor:
        if ref in self._by_sig:
            return self._by_sig[ref]
        matches = [fd for fd in self.abi if fd.name == ref]
        if len(matches) != 1:
            raise BundleError(f"{self.name}: cannot resolve function {ref!r}")
        return matches[0]

    def _build_script(self) -> CounterpartyScript:
        spec = self.attacker
        calls = []
        for c in spec.get("calls", []):
            fd = self._resolve(c["function"])
            out = validate_call(self.abi, RawCall(fd.name, tuple(str(a) for a in c.get("args", [])),
                                                  int(c.get("value", 0))))
            if not isinstance(out, ValidatedCall):
                raise BundleError(f"{self.name}: bad attacker call {c}: {out}")
            calls.append(ScriptedCall(self.address, out.calldata, out.value))
        return CounterpartyScript(tuple(calls), int(spec.get("reentry_limit", 1)))

    @property
    def script_account(self) -> int | None:
        if not self.attacker:
            return None
        return self.accounts[int(self.attacker.get("account", self.roles.attackers[0]))]

    def initial_state(self) -> WorldState:
        accounts = {a: Account(self.account_balance) for a in self.accounts}
        accounts[self.address] = Account(self.contract_balance, self.code, dict(self.storage))
        scripts = {}
        if self._script is not None:
            scripts[self.script_account] = self._script
        return WorldState(accounts, scripts)


def _int(v) -> int:
    if isinstance(v, int):
        return v
    s = str(v)
    return int(s, 16) if s.lower().startswith("0x") else int(s)


def load_bundle(path: str | Path) -> Bundle:
    p = Path(path)
    if not p.is_dir():
        raise BundleError(f"{p}: not a bundle directory")
    try:
        code = Bytecode.from_hex((p / "code.bin").read_text())
        abi = parse_abi((p / "abi.json").read_text())
    except FileNotFoundError as exc:
        raise BundleError(f"{p}: missing {Path(exc.filename).name}") from exc
    except (ValueError, AbiError) as exc:
        raise BundleError(f"{p}: {exc}") from exc

    def optional_json(name: str):
        f = p / name
        if not f.exists():
            return None
        try:
            return json.loads(f.read_text())
        except json.JSONDecodeError as exc:
            raise BundleError(f"{f}: {exc}") from exc

    roles_doc = optional_json("roles.json") or {}
    roles = Roles(int(roles_doc.get("owner", 0)), tuple(int(a) for a in roles_doc.get("attackers", [2])))
    state_doc = optional_json("state.json") or {}
    expected = optional_json("expected_bugs.json")
    return Bundle(
        name=p.name,
        code=code,
        abi=abi,
        roles=roles,
        contract_balance=_int(state_doc.get("balance", 0)),
        storage={_int(k): _int(v) for k, v in state_doc.get("storage", {}).items()},
        attacker=optional_json("attacker.json"),
        expected_bugs=tuple(expected) if expected is not None else None,
        path=p,
    )
