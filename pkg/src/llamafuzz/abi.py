"""Contract ABI parsing, calldata encoding/decoding and call validation.

Supported types: ``uint<N>``, ``int<N>``, ``address``, ``bool``,
``bytes<N>``, ``bytes``, ``string`` and one level of arrays (``T[]`` or
``T[k]``) over those. Tuples and nested arrays are rejected.

Python representations: integers and addresses are ``int``, ``bool`` is
``bool``, ``bytes<N>``/``bytes`` are ``bytes``, ``string`` is ``str`` and
arrays are tuples.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

from .crypto import keccak256

WORD = 32


class AbiError(ValueError):
    pass


class MalformedAbi(AbiError):
    pass


class ArityMismatch(AbiError):
    pass


class TypeMismatch(AbiError):
    pass


class ValueOutOfRange(AbiError):
    pass


class UnknownFunction(AbiError):
    pass


class DecodeError(AbiError):
    pass


@dataclass(frozen=True)
class AbiType:
    kind: str  # uint, int, address, bool, fixed_bytes, bytes, string, array
    bits: int = 0  # integer width or byte length of bytes<N>
    elem: "AbiType | None" = None
    length: int | None = None  # fixed array length; None for T[]

    @property
    def dynamic(self) -> bool:
        if self.kind in ("bytes", "string"):
            return True
        if self.kind == "array":
            return self.length is None or self.elem.dynamic
        return False

    @property
    def head_size(self) -> int:
        if self.kind == "array" and not self.dynamic:
            return WORD * self.length
        return WORD

    def canonical(self) -> str:
        if self.kind in ("uint", "int"):
            return f"{self.kind}{self.bits}"
        if self.kind == "fixed_bytes":
            return f"bytes{self.bits}"
        if self.kind == "array":
            suffix = "" if self.length is None else str(self.length)
            return f"{self.elem.canonical()}[{suffix}]"
        return self.kind

    @property
    def max_value(self) -> int:
        """Largest representable integer for integer-like kinds."""
        if self.kind == "uint":
            return (1 << self.bits) - 1
        if self.kind == "int":
            return (1 << (self.bits - 1)) - 1
        if self.kind == "address":
            return (1 << 160) - 1
        if self.kind == "bool":
            return 1
        raise TypeError(f"{self.canonical()} is not integer-like")

    @property
    def min_value(self) -> int:
        return -(1 << (self.bits - 1)) if self.kind == "int" else 0

    def __str__(self) -> str:
        return self.canonical()


_ARRAY = re.compile(r"^(.*)\[(\d*)\]$")


def parse_type(text: str) -> AbiType:
    text = text.strip()
    m = _ARRAY.match(text)
    if m:
        elem = parse_type(m.group(1))
        if elem.kind == "array":
            raise MalformedAbi(f"nested arrays are not supported: {text}")
        length = int(m.group(2)) if m.group(2) else None
        if length == 0:
            raise MalformedAbi(f"zero-length array: {text}")
        return AbiType("array", elem=elem, length=length)
    if text in ("address", "bool", "string", "bytes"):
        return AbiType(text)
    if text in ("uint", "int"):
        return AbiType(text, 256)
    for prefix in ("uint", "int"):
        if text.startswith(prefix) and text[len(prefix):].isdigit():
            bits = int(text[len(prefix):])
            if bits % 8 or not 8 <= bits <= 256:
                raise MalformedAbi(f"bad integer width: {text}")
            return AbiType(prefix, bits)
    if text.startswith("bytes") and text[5:].isdigit():
        n = int(text[5:])
        if not 1 <= n <= 32:
            raise MalformedAbi(f"bad bytes width: {text}")
        return AbiType("fixed_bytes", n)
    if text == "byte":
        return AbiType("fixed_bytes", 1)
    raise MalformedAbi(f"unsupported ABI type: {text!r}")


@dataclass(frozen=True)
class FunctionDescriptor:
    name: str
    inputs: tuple[AbiType, ...]
    mutability: str = "nonpayable"  # view, nonpayable, payable
    input_names: tuple[str, ...] = ()
    selector: bytes = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "selector", keccak256(self.signature.encode())[:4])

    @property
    def signature(self) -> str:
        return f"{self.name}({','.join(t.canonical() for t in self.inputs)})"

    @property
    def payable(self) -> bool:
        return self.mutability == "payable"

    @property
    def modifies_state(self) -> bool:
        return self.mutability != "view"


def parse_abi(json_text: str) -> list[FunctionDescriptor]:
    try:
        entries = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise MalformedAbi(f"invalid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise MalformedAbi("ABI must be a JSON array")
    out = []
    for entry in entries:
        if not isinstance(entry, dict):
            raise MalformedAbi("ABI entries must be objects")
        if entry.get("type", "function") != "function":
            continue
        if "name" not in entry or not isinstance(entry["name"], str):
            raise MalformedAbi("function entry without a name")
        inputs = entry.get("inputs", [])
        if not isinstance(inputs, list):
            raise MalformedAbi(f"{entry['name']}: inputs must be a list")
        types = []
        names = []
        for param in inputs:
            if not isinstance(param, dict) or "type" not in param:
                raise MalformedAbi(f"{entry['name']}: input without a type")
            types.append(parse_type(param["type"]))
            names.append(str(param.get("name", "")))
        mut = entry.get("stateMutability")
        if mut is None:
            if entry.get("payable"):
                mut = "payable"
            elif entry.get("constant"):
                mut = "view"
            else:
                mut = "nonpayable"
        if mut == "pure":
            mut = "view"
        if mut not in ("view", "nonpayable", "payable"):
            raise MalformedAbi(f"{entry['name']}: unknown stateMutability {mut!r}")
        out.append(FunctionDescriptor(entry["name"], tuple(types), mut, tuple(names)))
    return out


def abi_to_json(fds: Sequence[FunctionDescriptor]) -> str:
    entries = []
    for fd in fds:
        names = fd.input_names or ("",) * len(fd.inputs)
        entries.append({
            "type": "function",
            "name": fd.name,
            "inputs": [{"name": n, "type": t.canonical()} for n, t in zip(names, fd.inputs)],
            "outputs": [],
            "stateMutability": fd.mutability,
        })
    return json.dumps(entries, indent=2)


# -- encoding -------------------------------------------------------------------

def _check_value(t: AbiType, v: Any) -> None:
    k = t.kind
    if k in ("uint", "int", "address"):
        if isinstance(v, bool) or not isinstance(v, int):
            raise TypeMismatch(f"{t} expects an integer, got {type(v).__name__}")
        lo, hi = t.min_value, t.max_value
        if not lo <= v <= hi:
            raise ValueOutOfRange(f"{v} does not fit {t}")
    elif k == "bool":
        if not isinstance(v, bool):
            raise TypeMismatch(f"bool expects True/False, got {v!r}")
    elif k == "fixed_bytes":
        if not isinstance(v, (bytes, bytearray)):
            raise TypeMismatch(f"{t} expects bytes")
        if len(v) != t.bits:
            raise ValueOutOfRange(f"{t} expects exactly {t.bits} bytes")
    elif k == "bytes":
        if not isinstance(v, (bytes, bytearray)):
            raise TypeMismatch("bytes expects bytes")
    elif k == "string":
        if not isinstance(v, str):
            raise TypeMismatch("string expects str")
    elif k == "array":
        if not isinstance(v, (list, tuple)):
            raise TypeMismatch(f"{t} expects a sequence")
        if t.length is not None and len(v) != t.length:
            raise ArityMismatch(f"{t} expects {t.length} elements")


def _pad_right(data: bytes) -> bytes:
    return data + b"\x00" * (-len(data) % WORD)


def _encode_one(t: AbiType, v: Any) -> bytes:
    _check_value(t, v)
    k = t.kind
    if k in ("uint", "address"):
        return v.to_bytes(WORD, "big")
    if k == "int":
        return (v % (1 << 256)).to_bytes(WORD, "big")
    if k == "bool":
        return (1 if v else 0).to_bytes(WORD, "big")
    if k == "fixed_bytes":
        return bytes(v).ljust(WORD, b"\x00")
    if k == "bytes":
        return len(v).to_bytes(WORD, "big") + _pad_right(bytes(v))
    if k == "string":
        raw = v.encode()
        return len(raw).to_bytes(WORD, "big") + _pad_right(raw)
    # array
    body = _encode_tuple([t.elem] * len(v), list(v))
    if t.length is None:
        return len(v).to_bytes(WORD, "big") + body
    return body


def _encode_tuple(types: Sequence[AbiType], values: Sequence[Any]) -> bytes:
    heads: list[bytes | None] = []
    tails: list[bytes] = []
    for t, v in zip(types, values):
        if t.dynamic:
            heads.append(None)
            tails.append(_encode_one(t, v))
        else:
            heads.append(_encode_one(t, v))
            tails.append(b"")
    head_len = sum(t.head_size for t in types)
    out = bytearray()
    offset = head_len
    for h, tail in zip(heads, tails):
        if h is None:
            out += offset.to_bytes(WORD, "big")
            offset += len(tail)
        else:
            out += h
    for tail in tails:
        out += tail
    return bytes(out)


def encode_args(types: Sequence[AbiType], args: Sequence[Any]) -> bytes:
    if len(types) != len(args):
        raise ArityMismatch(f"expected {len(types)} arguments, got {len(args)}")
    return _encode_tuple(types, args)


def encode_call(fd: FunctionDescriptor, args: Sequence[Any]) -> bytes:
    return fd.selector + encode_args(fd.inputs, args)


def _word(data: bytes, pos: int) -> int:
    if pos + WORD > len(data):
        raise DecodeError("calldata too short")
    return int.from_bytes(data[pos:pos + WORD], "big")


def _decode_one(t: AbiType, data: bytes, pos: int) -> Any:
    k = t.kind
    if k in ("uint", "address", "bool", "int"):
        v = _word(data, pos)
        if k == "int":
            if v >> 255:
                v -= 1 << 256
            if not t.min_value <= v <= t.max_value:
                raise DecodeError(f"{v} does not fit {t}")
            return v
        if v > t.max_value:
            raise DecodeError(f"{v} does not fit {t}")
        return bool(v) if k == "bool" else v
    if k == "fixed_bytes":
        _word(data, pos)
        return bytes(data[pos:pos + t.bits])
    if k in ("bytes", "string"):
        n = _word(data, pos)
        if pos + WORD + n > len(data):
            raise DecodeError("dynamic value runs past end of data")
        raw = bytes(data[pos + WORD:pos + WORD + n])
        if k == "bytes":
            return raw
        try:
            return raw.decode()
        except UnicodeDecodeError as exc:
            raise DecodeError("string is not valid UTF-8") from exc
    if t.length is None:
        n = _word(data, pos)
        if n > len(data):
            raise DecodeError("array length exceeds data")
        return tuple(_decode_tuple([t.elem] * n, data, pos + WORD))
    return tuple(_decode_tuple([t.elem] * t.length, data, pos))


def _decode_tuple(types: Sequence[AbiType], data: bytes, base: int) -> list[Any]:
    out = []
    pos = base
    for t in types:
        if t.dynamic:
            out.append(_decode_one(t, data, base + _word(data, pos)))
        else:
            out.append(_decode_one(t, data, pos))
        pos += t.head_size
    return out


def decode_args(types: Sequence[AbiType], data: bytes) -> list[Any]:
    return _decode_tuple(types, data, 0)


def decode_call(fds: Sequence[FunctionDescriptor], calldata: bytes) -> tuple[FunctionDescriptor, list[Any]]:
    sel = calldata[:4]
    for fd in fds:
        if fd.selector == sel:
            return fd, decode_args(fd.inputs, calldata[4:])
    raise UnknownFunction(f"no function with selector 0x{sel.hex()}")


# -- validation of proposed calls -------------------------------------------------

@dataclass(frozen=True)
class Defect:
    kind: str  # ArityMismatch, TypeMismatch
    message: str


@dataclass(frozen=True)
class RawCall:
    """A call as proposed by a generator: literals not yet type-checked."""

    name: str
    args: tuple[str, ...]
    value: int = 0
    sender: int = 0


@dataclass(frozen=True)
class ValidatedCall:
    fd: FunctionDescriptor
    args: tuple[Any, ...]
    value: int = 0
    sender: int = 0

    @property
    def calldata(self) -> bytes:
        return encode_call(self.fd, self.args)


def split_literals(text: str) -> list[str]:
    """Split a comma-separated argument list, respecting brackets and quotes."""
    parts: list[str] = []
    depth = 0
    quote = None
    escaped = False
    cur: list[str] = []
    for ch in text:
        if quote:
            cur.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
            continue
        if ch in "\"'":
            quote = ch
        elif ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
            continue
        cur.append(ch)
    tail = "".join(cur).strip()
    if tail or parts:
        parts.append(tail)
    return parts


def _parse_int(lit: str) -> int:
    s = lit.strip().replace("_", "")
    neg = s.startswith("-")
    if neg:
        s = s[1:]
    v = int(s, 16) if s.lower().startswith("0x") else int(s, 10)
    return -v if neg else v


def coerce_literal(t: AbiType, lit: Any) -> Any:
    """Convert a literal to a value of type ``t``, wrapping out-of-range numbers.

    Raises TypeMismatch when the literal cannot denote a value of the type.
    """
    k = t.kind
    try:
        if k in ("uint", "int", "address"):
            v = lit if isinstance(lit, int) and not isinstance(lit, bool) else _parse_int(str(lit))
            if k == "int":
                v %= 1 << t.bits
                return v - (1 << t.bits) if v > t.max_value else v
            return v % (t.max_value + 1)
        if k == "bool":
            s = str(lit).strip().lower()
            if s in ("true", "1"):
                return True
            if s in ("false", "0"):
                return False
            raise TypeMismatch(f"not a bool literal: {lit!r}")
        if k in ("fixed_bytes", "bytes"):
            if isinstance(lit, (bytes, bytearray)):
                raw = bytes(lit)
            else:
                s = str(lit).strip().strip("\"'")
                if s.lower().startswith("0x"):
                    s = s[2:]
                if len(s) % 2:
                    s = "0" + s
                raw = bytes.fromhex(s)
            if k == "fixed_bytes":
                return raw[:t.bits].ljust(t.bits, b"\x00")
            return raw
        if k == "string":
            s = str(lit).strip()
            if len(s) >= 2 and s[0] == s[-1] == '"':
                try:
                    return json.loads(s)
                except json.JSONDecodeError:
                    return s[1:-1]
            if len(s) >= 2 and s[0] == s[-1] == "'":
                return s[1:-1]
            return s
        # array
        if isinstance(lit, (list, tuple)):
            items = list(lit)
        else:
            s = str(lit).strip()
            if not (s.startswith("[") and s.endswith("]")):
                raise TypeMismatch(f"{t} expects [..] literal, got {lit!r}")
            items = split_literals(s[1:-1])
        if t.length is not None:
            items = (items + ["0"] * t.length)[:t.length]
        return tuple(coerce_literal(t.elem, x) for x in items)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, TypeMismatch):
            raise
        raise TypeMismatch(f"cannot read {lit!r} as {t}") from exc


def validate_call(fds: Sequence[FunctionDescriptor], raw: RawCall,
                  n_accounts: int | None = None) -> ValidatedCall | list[Defect]:
    """Check a proposed call against the ABI, coercing what can be coerced.

    Integers wrap into the type's range, addresses are reduced to 160 bits,
    value sent to a non-payable function becomes 0 and the sender index
    wraps into the configured account set.
    """
    candidates = [fd for fd in fds if fd.name == raw.name]
    if not candidates:
        raise UnknownFunction(raw.name)
    fd = next((c for c in candidates if len(c.inputs) == len(raw.args)), None)
    if fd is None:
        want = " or ".join(str(len(c.inputs)) for c in candidates)
        return [Defect("ArityMismatch", f"{raw.name} takes {want} arguments, got {len(raw.args)}")]
    defects = []
    args = []
    for i, (t, lit) in enumerate(zip(fd.inputs, raw.args)):
        try:
            args.append(coerce_literal(t, lit))
        except TypeMismatch as exc:
            defects.append(Defect("TypeMismatch", f"argument {i}: {exc}"))
    if defects:
        return defects
    value = max(0, raw.value) if fd.payable else 0
    value %= 1 << 256
    sender = raw.sender % n_accounts if n_accounts else raw.sender
    return ValidatedCall(fd, tuple(args), value, sender)


def format_literal(t: AbiType, v: Any) -> str:
    """Render a value as a literal accepted by ``coerce_literal``."""
    k = t.kind
    if k == "bool":
        return "true" if v else "false"
    if k == "address":
        return f"0x{v:040x}"
    if k in ("uint", "int"):
        return str(v)
    if k in ("fixed_bytes", "bytes"):
        return "0x" + bytes(v).hex()
    if k == "string":
        return json.dumps(v)
    return "[" + ",".join(format_literal(t.elem, x) for x in v) + "]"
