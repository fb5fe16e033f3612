"""Prompt construction and parsing of generated call sequences.

Prompts mix free-text instructions for a language model with
machine-readable directive lines (``TASK``, ``FUNCTION``, ``ACCOUNTS``,
``COUNT``, ``HINT-KEY``) that the offline stub reads.

Generated sequences use one call per line::

    name(arg1,arg2) value=<wei> from=<account-index>

and sequences are separated by a line holding ``---``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from ..abi import FunctionDescriptor, RawCall, split_literals

CALL_LINE = re.compile(
    r"^\s*(?:[-*]\s*|\d+[.)]\s*)?([A-Za-z_]\w*)\s*\((.*)\)\s*"
    r"(?:value\s*=\s*(\S+))?\s*(?:from\s*=\s*(\S+))?\s*;?\s*$"
)
SEPARATOR = "---"


class UnparseableOutput(Exception):
    pass


@dataclass(frozen=True)
class FunctionSummary:
    fd: FunctionDescriptor
    text: str


def _function_lines(fds: Sequence[FunctionDescriptor]) -> list[str]:
    return [f"FUNCTION {fd.signature} {fd.mutability}" for fd in fds]


def abstraction_prompt(fds: Sequence[FunctionDescriptor]) -> str:
    return "\n".join([
        "You are analysing a smart contract through its ABI.",
        "For every function below, write one line of the form",
        "`<signature>: <short description of what it does and whether it changes state>`.",
        "TASK abstract",
        *_function_lines(fds),
    ])


def sequence_prompt(summaries: Sequence[FunctionSummary], count: int, n_accounts: int,
                    hint_text: str | None = None, hint_key: str | None = None,
                    attacker: int | None = None) -> str:
    lines = [
        "You write transaction sequences that exercise a smart contract.",
        "Function summaries:",
        *(f"  {s.fd.signature}: {s.text}" for s in summaries),
        f"Write {count} different sequences of 1 to 4 calls each. Put one call per line as",
        "`name(arg1,arg2) value=<wei> from=<account index>` and separate sequences with a line `---`.",
        "Prefer argument values at type boundaries and call orders that build on earlier state.",
        "TASK sequences",
        *_function_lines([s.fd for s in summaries]),
        f"ACCOUNTS {n_accounts}",
        f"COUNT {count}",
    ]
    if attacker is not None:
        lines.append(f"ATTACKER {attacker}")
    if hint_key:
        lines.append(f"HINT-KEY {hint_key}")
    if hint_text:
        lines.append(hint_text)
    return "\n".join(lines)


def edge_case_prompt(summaries: Sequence[FunctionSummary], sequences: Sequence[Sequence[RawCall]],
                     n_accounts: int) -> str:
    body = []
    for i, seq in enumerate(sequences):
        if i:
            body.append(SEPARATOR)
        body.extend(format_call(c) for c in seq)
    return "\n".join([
        "Below are valid transaction sequences for a smart contract.",
        "Rewrite each one into a variant more likely to reach unusual code paths:",
        "extreme argument values, large or zero ether amounts, different senders.",
        "Keep the same line format and separate sequences with `---`.",
        "TASK edge-cases",
        *_function_lines([s.fd for s in summaries]),
        f"ACCOUNTS {n_accounts}",
        "BEGIN SEQUENCES",
        *body,
        "END SEQUENCES",
    ])


def format_call(c: RawCall) -> str:
    return f"{c.name}({','.join(c.args)}) value={c.value} from={c.sender}"


def _parse_number(text: str | None) -> int | None:
    if text is None:
        return 0
    s = text.strip().rstrip(",;").replace("_", "")
    try:
        return int(s, 16) if s.lower().startswith("0x") else int(s)
    except ValueError:
        return None


def parse_call_line(line: str) -> RawCall | None:
    m = CALL_LINE.match(line)
    if not m:
        return None
    name, args, value, sender = m.groups()
    v, s = _parse_number(value), _parse_number(sender)
    if v is None or s is None or v < 0 or s < 0:
        return None
    return RawCall(name, tuple(split_literals(args)), v, s)


def parse_sequences(text: str) -> list[list[RawCall]]:
    """Extract call sequences; unparseable lines are dropped, empty blocks skipped."""
    out: list[list[RawCall]] = []
    cur: list[RawCall] = []
    for line in text.splitlines():
        if line.strip() == SEPARATOR:
            if cur:
                out.append(cur)
            cur = []
            continue
        call = parse_call_line(line)
        if call is not None:
            cur.append(call)
    if cur:
        out.append(cur)
    return out


def parse_summaries(text: str, fds: Sequence[FunctionDescriptor]) -> list[FunctionSummary]:
    by_sig: dict[str, str] = {}
    for line in text.splitlines():
        sig, sep, desc = line.partition(":")
        if sep and desc.strip():
            by_sig[sig.strip().strip("`")] = desc.strip()
    return [FunctionSummary(fd, by_sig[fd.signature]) for fd in fds if fd.signature in by_sig]
