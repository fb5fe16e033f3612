"""The ten transaction/environment mutation operators.

Each operator picks one applicable transaction uniformly and perturbs
exactly one field of it, drawing from a small palette of moves.
"""

from __future__ import annotations

import enum
import random
from dataclasses import replace
from typing import Any, Callable

from ..abi import AbiType
from ..bundle import DEFAULT_GAS, Bundle
from ..corpus import Origin, Seed, Transaction

WORD_MAX = (1 << 256) - 1
MIN_GAS = 50
TIMESTAMP_SPAN = 10**8
BLOCK_SPAN = 10**6


class InapplicableOperator(Exception):
    pass


class Operator(str, enum.Enum):
    ARGUMENTS = "Arguments"
    ACCOUNT = "Account"
    TX_AMOUNT = "TxAmount"
    GAS_LIMIT = "GasLimit"
    TIMESTAMP = "Timestamp"
    BLOCK_NUMBER = "BlockNumber"
    BALANCE = "Balance"
    CALL_RETURN_VALUE = "CallReturnValue"
    RETURN_DATA_SIZE = "ReturnDataSize"
    EXT_CODE_SIZE = "ExtCodeSize"


OPERATORS: tuple[Operator, ...] = tuple(Operator)


def _pick_changed(rng: random.Random, old: Any, moves: list[Callable[[], Any]]) -> Any:
    """Apply palette moves in random order until one changes the value."""
    order = list(moves)
    rng.shuffle(order)
    for move in order:
        new = move()
        if new != old:
            return new
    raise InapplicableOperator("no palette move changes the value")


def _mutate_int(rng: random.Random, t: AbiType, v: int) -> int:
    lo, hi = t.min_value, t.max_value
    bits = t.bits if t.kind in ("uint", "int") else 160
    span = 1 << bits

    def wrap(x: int) -> int:
        x = (x - lo) % span + lo
        return x

    boundaries = [0, 1, hi, lo, hi - 1] + [(1 << k) - 1 for k in (8, 16, 32, 64, 128) if (1 << k) - 1 <= hi]
    moves = [
        lambda: wrap(v ^ (1 << rng.randrange(bits))),
        lambda: wrap(v + 1),
        lambda: wrap(v - 1),
        lambda: rng.choice(boundaries),
        lambda: rng.randint(lo, hi),
    ]
    return _pick_changed(rng, v, moves)


def mutate_value(rng: random.Random, t: AbiType, v: Any, bundle: Bundle) -> Any:
    k = t.kind
    if k in ("uint", "int"):
        return _mutate_int(rng, t, v)
    if k == "address":
        pool = [a for a in (*bundle.accounts, bundle.address, 0) if a != v]
        return rng.choice(pool) if rng.random() < 0.8 else _mutate_int(rng, t, v)
    if k == "bool":
        return not v
    if k == "fixed_bytes":
        b = bytearray(v)
        i = rng.randrange(len(b))
        b[i] ^= 1 << rng.randrange(8) if rng.random() < 0.5 else rng.randrange(1, 256)
        return bytes(b)
    if k == "bytes":
        if not v or rng.random() < 0.3:
            return bytes(rng.randrange(256) for _ in range(rng.randrange(0, 40))) + (b"" if v else b"\x01")
        b = bytearray(v)
        b[rng.randrange(len(b))] ^= rng.randrange(1, 256)
        return bytes(b)
    if k == "string":
        alphabet = "abcxyz0123 "
        return v + rng.choice(alphabet) if rng.random() < 0.5 or not v else v[:-1]
    # arrays
    items = list(v)
    if items and rng.random() < 0.7:
        i = rng.randrange(len(items))
        items[i] = mutate_value(rng, t.elem, items[i], bundle)
        return tuple(items)
    if t.length is None:
        if items and rng.random() < 0.5:
            return tuple(items[:-1])
        return tuple(items + [default_value(t.elem)])
    i = rng.randrange(len(items))
    items[i] = mutate_value(rng, t.elem, items[i], bundle)
    return tuple(items)


def default_value(t: AbiType) -> Any:
    k = t.kind
    if k in ("uint", "int", "address"):
        return 0
    if k == "bool":
        return False
    if k == "fixed_bytes":
        return b"\x00" * t.bits
    if k == "bytes":
        return b""
    if k == "string":
        return ""
    return tuple(default_value(t.elem) for _ in range(t.length or 0))


def _amount_moves(rng: random.Random, v: int, cap: int) -> list[Callable[[], int]]:
    return [lambda: 0, lambda: 1, lambda: cap, lambda: min(cap, v * 2), lambda: v // 2]


def _override_moves(rng: random.Random, cap: int) -> list[Callable[[], int]]:
    return [lambda: 0, lambda: 1, lambda: rng.randint(2, cap)]


def _set_pair(pairs: tuple[tuple[int, int], ...], key: int, value: int) -> tuple[tuple[int, int], ...]:
    d = dict(pairs)
    d[key] = value
    return tuple(sorted(d.items()))


def _mutate_tx(op: Operator, tx: Transaction, bundle: Bundle, rng: random.Random) -> Transaction:
    e = tx.env
    if op is Operator.ARGUMENTS:
        fd = bundle.function(tx.function)
        i = rng.randrange(len(fd.inputs))
        args = list(tx.args)
        args[i] = mutate_value(rng, fd.inputs[i], args[i], bundle)
        return replace(tx, args=tuple(args))
    if op is Operator.ACCOUNT:
        choices = [i for i in range(len(bundle.accounts)) if i != tx.sender]
        return replace(tx, sender=rng.choice(choices))
    if op is Operator.TX_AMOUNT:
        value = _pick_changed(rng, tx.value, _amount_moves(rng, tx.value, bundle.account_balance))
        return replace(tx, value=value)
    if op is Operator.GAS_LIMIT:
        g = e.gas_limit
        moves = [lambda: max(1, g // 2), lambda: max(1, g - 1), lambda: MIN_GAS, lambda: DEFAULT_GAS]
        return tx.with_env(gas_limit=_pick_changed(rng, g, moves))
    if op is Operator.TIMESTAMP:
        t = e.timestamp
        moves = [lambda: t + 1, lambda: max(0, t - 1), lambda: t + 86400,
                 lambda: rng.randrange(t, t + TIMESTAMP_SPAN)]
        return tx.with_env(timestamp=_pick_changed(rng, t, moves))
    if op is Operator.BLOCK_NUMBER:
        b = e.block_number
        moves = [lambda: b + 1, lambda: max(0, b - 1), lambda: b + 1000,
                 lambda: rng.randrange(b, b + BLOCK_SPAN)]
        return tx.with_env(block_number=_pick_changed(rng, b, moves))
    if op is Operator.BALANCE:
        target = bundle.address if rng.random() < 0.75 else rng.choice(bundle.accounts)
        current = dict(e.balance_overrides).get(
            target, bundle.contract_balance if target == bundle.address else bundle.account_balance)
        new = _pick_changed(rng, current, _amount_moves(rng, current, WORD_MAX))
        return tx.with_env(balance_overrides=_set_pair(e.balance_overrides, target, new))
    if op is Operator.CALL_RETURN_VALUE:
        new = _pick_changed(rng, e.call_return, _override_moves(rng, WORD_MAX))
        return tx.with_env(call_return=new)
    if op is Operator.RETURN_DATA_SIZE:
        new = _pick_changed(rng, e.return_data_size, _override_moves(rng, 1024))
        return tx.with_env(return_data_size=new)
    if op is Operator.EXT_CODE_SIZE:
        target = rng.choice((bundle.address, *bundle.accounts))
        current = dict(e.ext_code_size).get(target)
        new = _pick_changed(rng, current, _override_moves(rng, 1 << 16))
        return tx.with_env(ext_code_size=_set_pair(e.ext_code_size, target, new))
    raise ValueError(f"unknown operator {op}")


def _applicable(op: Operator, tx: Transaction, bundle: Bundle) -> bool:
    if op is Operator.ARGUMENTS:
        return bool(bundle.function(tx.function).inputs)
    if op is Operator.ACCOUNT:
        return len(bundle.accounts) > 1
    if op is Operator.TX_AMOUNT:
        return bundle.function(tx.function).payable
    return True


def apply(op: Operator, seed: Seed, bundle: Bundle, rng: random.Random) -> Seed:
    """Perturb one field of one uniformly chosen applicable transaction."""
    candidates = [i for i, tx in enumerate(seed.txs) if _applicable(op, tx, bundle)]
    if not candidates:
        raise InapplicableOperator(f"{op.value} has no applicable transaction")
    i = rng.choice(candidates)
    txs = list(seed.txs)
    txs[i] = _mutate_tx(op, txs[i], bundle, rng)
    return Seed(tuple(txs), Origin.MUTATION)
