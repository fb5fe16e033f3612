"""A small two-pass assembler for the supported opcode subset.

Syntax, whitespace separated, several instructions per line allowed::

    ; comment (also // comment)
    loop:                 ; defines a label and emits JUMPDEST
    PUSH 0x2a             ; minimal-width PUSHn
    PUSH32 1              ; explicit width
    PUSH @loop            ; PUSH2 with the label's offset
    PUSH sel(f(uint256))  ; PUSH4 with a function selector
    SSTORE STOP

The assembler is used to build the contract corpus and the interpreter
micro-tests; it knows nothing about contracts beyond opcode names.
"""

from __future__ import annotations

import re

from .crypto import keccak256
from .vm.opcodes import BY_NAME, OPCODES


class AsmError(ValueError):
    pass


_SEL = re.compile(r"^sel\((.*)\)$")


def _tokens(source: str) -> list[str]:
    out: list[str] = []
    for raw in source.splitlines():
        line = raw.split(";", 1)[0].split("//", 1)[0]
        # sel(...) may contain commas but never spaces
        out.extend(line.split())
    return out


def _immediate(tok: str, labels: dict[str, int] | None) -> tuple[int, int | None]:
    """Return (value, forced width) for a PUSH operand."""
    if tok.startswith("@"):
        if labels is None:
            return 0, 2
        if tok[1:] not in labels:
            raise AsmError(f"undefined label {tok[1:]!r}")
        return labels[tok[1:]], 2
    m = _SEL.match(tok)
    if m:
        return int.from_bytes(keccak256(m.group(1).encode())[:4], "big"), 4
    try:
        return int(tok, 0), None
    except ValueError as exc:
        raise AsmError(f"bad immediate {tok!r}") from exc


def _width(value: int) -> int:
    if value < 0 or value >= 1 << 256:
        raise AsmError(f"immediate {value} out of range")
    return max(1, (value.bit_length() + 7) // 8)


def assemble(source: str) -> bytes:
    toks = _tokens(source)
    labels: dict[str, int] = {}
    for pass_no in (0, 1):
        out = bytearray()
        i = 0
        while i < len(toks):
            tok = toks[i]
            i += 1
            if tok.endswith(":"):
                name = tok[:-1]
                if pass_no == 0:
                    if name in labels:
                        raise AsmError(f"duplicate label {name!r}")
                    labels[name] = len(out)
                out.append(BY_NAME["JUMPDEST"].code)
                continue
            upper = tok.upper()
            if upper == "PUSH" or (upper.startswith("PUSH") and upper[4:].isdigit()):
                if i >= len(toks):
                    raise AsmError("PUSH without operand")
                value, forced = _immediate(toks[i], labels if pass_no else None)
                i += 1
                width = int(upper[4:]) if upper != "PUSH" else (forced or _width(value))
                if not 1 <= width <= 32 or value >= 1 << (8 * width):
                    raise AsmError(f"{tok} {toks[i - 1]} does not fit")
                out.append(0x5F + width)
                out += value.to_bytes(width, "big")
                continue
            info = BY_NAME.get(upper)
            if info is None:
                raise AsmError(f"unknown mnemonic {tok!r}")
            out.append(info.code)
    return bytes(out)


def disassemble(code: bytes) -> list[str]:
    lines = []
    pc = 0
    while pc < len(code):
        op = code[pc]
        info = OPCODES.get(op)
        if info is None:
            lines.append(f"{pc:04x}: <0x{op:02x}>")
            pc += 1
        elif 0x60 <= op <= 0x7F:
            width = op - 0x5F
            imm = code[pc + 1 : pc + 1 + width]
            lines.append(f"{pc:04x}: {info.name} 0x{imm.hex()}")
            pc += 1 + width
        else:
            lines.append(f"{pc:04x}: {info.name}")
            pc += 1
    return lines


def build_bundle_code(bundle_dir) -> bytes:
    """Assemble ``source.easm`` of a bundle directory into its ``code.bin``."""
    from pathlib import Path

    d = Path(bundle_dir)
    code = assemble((d / "source.easm").read_text())
    (d / "code.bin").write_text(code.hex() + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    import sys

    dirs = sys.argv[1:] if argv is None else argv
    if not dirs:
        print("usage: python -m llamafuzz.asm BUNDLE_DIR...", file=sys.stderr)
        return 2
    for d in dirs:
        code = build_bundle_code(d)
        print(f"{d}: {len(code)} bytes")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
