"""256-bit bitvector expressions over symbolic transaction inputs.

Expressions are plain tuples so they hash and compare structurally:

* ``("const", v)`` and ``("sym", name)`` are leaves;
* ``(op, a, b)`` / ``(op, a)`` apply an operator to sub-expressions;
* ``("keccak", parts)`` is an opaque hash of a tuple of 32-byte words
  (expressions) and raw ``bytes`` chunks. It can be evaluated forwards
  but is never inverted.
"""

from __future__ import annotations

from typing import Mapping, Union

from ..crypto import keccak_int

WORD_BITS = 256
WORD_MOD = 1 << WORD_BITS
WORD_MASK = WORD_MOD - 1
SIGN_BIT = 1 << 255

Expr = tuple

BINARY = frozenset({"add", "sub", "mul", "div", "mod", "and", "or", "xor", "shl", "shr",
                    "lt", "gt", "slt", "sgt", "eq", "byte", "sdiv"})
UNARY = frozenset({"not", "iszero"})
COMPARISONS = frozenset({"lt", "gt", "slt", "sgt", "eq", "iszero"})


class SymbolicBudgetExceeded(Exception):
    pass


def const(v: int) -> Expr:
    return ("const", v & WORD_MASK)


def sym(name: str) -> Expr:
    return ("sym", name)


def is_const(e: Expr) -> bool:
    return e[0] == "const"


def _signed(v: int) -> int:
    return v - WORD_MOD if v & SIGN_BIT else v


def apply_op(op: str, a: int, b: int = 0) -> int:
    """Concrete semantics; operand order is the EVM's (a = top of stack)."""
    if op == "add":
        return (a + b) & WORD_MASK
    if op == "sub":
        return (a - b) & WORD_MASK
    if op == "mul":
        return (a * b) & WORD_MASK
    if op == "div":
        return a // b if b else 0
    if op == "sdiv":
        if b == 0:
            return 0
        sa, sb = _signed(a), _signed(b)
        q = abs(sa) // abs(sb)
        return (-q if (sa < 0) != (sb < 0) else q) & WORD_MASK
    if op == "mod":
        return a % b if b else 0
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "not":
        return WORD_MASK ^ a
    if op == "shl":  # a = shift, b = value
        return (b << a) & WORD_MASK if a < 256 else 0
    if op == "shr":
        return b >> a if a < 256 else 0
    if op == "byte":
        return (b >> (8 * (31 - a))) & 0xFF if a < 32 else 0
    if op == "lt":
        return int(a < b)
    if op == "gt":
        return int(a > b)
    if op == "slt":
        return int(_signed(a) < _signed(b))
    if op == "sgt":
        return int(_signed(a) > _signed(b))
    if op == "eq":
        return int(a == b)
    if op == "iszero":
        return int(a == 0)
    raise ValueError(f"unknown operator {op}")


class Builder:
    """Creates expression nodes while enforcing a node budget."""

    def __init__(self, budget: int = 100_000) -> None:
        self.budget = budget
        self.nodes = 0

    def _count(self) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise SymbolicBudgetExceeded(f"more than {self.budget} expression nodes")

    def sym(self, name: str) -> Expr:
        self._count()
        return ("sym", name)

    def op(self, op: str, *args: Expr) -> Expr:
        if all(a[0] == "const" for a in args):
            return const(apply_op(op, *(a[1] for a in args)))
        self._count()
        return (op, *args)

    def keccak(self, parts: tuple[Union[Expr, bytes], ...]) -> Expr:
        self._count()
        return ("keccak", parts)


def evaluate(e: Expr, env: Mapping[str, int], cache: dict | None = None) -> int:
    """Concrete value of ``e`` under ``env`` (iterative, shares work across a DAG)."""
    memo: dict = cache if cache is not None else {}
    stack = [e]
    while stack:
        node = stack[-1]
        key = id(node)
        if key in memo:
            stack.pop()
            continue
        tag = node[0]
        if tag == "const":
            memo[key] = node[1]
            stack.pop()
            continue
        if tag == "sym":
            memo[key] = env[node[1]] & WORD_MASK
            stack.pop()
            continue
        children = [p for p in node[1] if not isinstance(p, bytes)] if tag == "keccak" else node[1:]
        missing = [c for c in children if id(c) not in memo]
        if missing:
            stack.extend(missing)
            continue
        stack.pop()
        if tag == "keccak":
            data = b"".join(p if isinstance(p, bytes) else memo[id(p)].to_bytes(32, "big") for p in node[1])
            memo[key] = keccak_int(data)
        else:
            memo[key] = apply_op(tag, *(memo[id(c)] for c in children))
    return memo[id(e)]


def symbols(e: Expr) -> frozenset[str]:
    out: set[str] = set()
    seen: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        tag = node[0]
        if tag == "sym":
            out.add(node[1])
        elif tag == "keccak":
            stack.extend(p for p in node[1] if not isinstance(p, bytes))
        elif tag != "const":
            stack.extend(node[1:])
    return frozenset(out)


def constants(e: Expr) -> set[int]:
    out: set[int] = set()
    seen: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        tag = node[0]
        if tag == "const":
            out.add(node[1])
        elif tag == "keccak":
            stack.extend(p for p in node[1] if not isinstance(p, bytes))
        elif tag != "sym":
            stack.extend(node[1:])
    return out


def size(e: Expr) -> int:
    seen: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        tag = node[0]
        if tag == "keccak":
            stack.extend(p for p in node[1] if not isinstance(p, bytes))
        elif tag not in ("const", "sym"):
            stack.extend(node[1:])
    return len(seen)


def render(e: Expr) -> str:
    tag = e[0]
    if tag == "const":
        return hex(e[1])
    if tag == "sym":
        return e[1]
    if tag == "keccak":
        return "keccak(" + ", ".join(p.hex() if isinstance(p, bytes) else render(p) for p in e[1]) + ")"
    return f"{tag}(" + ", ".join(render(a) for a in e[1:]) + ")"
