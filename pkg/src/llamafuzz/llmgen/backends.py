"""Text-generation backends: a JSON-over-HTTP client and a deterministic stub."""

from __future__ import annotations

import hashlib
import json
import os
import random
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Protocol

from ..abi import AbiType, parse_type
from ..crypto import keccak_int

ENDPOINT_ENV = "LLAMA_LLM_ENDPOINT"
TOKEN_ENV = "LLAMA_LLM_TOKEN"
DEFAULT_TIMEOUT = 30.0

ETHER = 10**18
MAGIC = keccak_int(b"llamafuzz.magic")
PAYABLE_VALUES = (0, 1, ETHER)


class BackendUnavailable(Exception):
    pass


class LlmBackend(Protocol):
    name: str

    def complete(self, prompt: str, max_tokens: int = 1024, temperature: float = 0.7) -> str:
        ...


@dataclass
class RemoteBackend:
    endpoint: str
    token: str | None = None
    timeout: float = DEFAULT_TIMEOUT
    name: str = "remote"

    @classmethod
    def from_env(cls, timeout: float = DEFAULT_TIMEOUT) -> "RemoteBackend | None":
        endpoint = os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            return None
        return cls(endpoint, os.environ.get(TOKEN_ENV), timeout)

    def complete(self, prompt: str, max_tokens: int = 1024, temperature: float = 0.7) -> str:
        body = json.dumps({"prompt": prompt, "max_tokens": max_tokens,
                           "temperature": temperature}).encode()
        req = urllib.request.Request(self.endpoint, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode())
        except urllib.error.HTTPError as exc:
            raise BackendUnavailable(f"backend returned HTTP {exc.code}") from exc
        except (urllib.error.URLError, socket.timeout, TimeoutError, ConnectionError) as exc:
            raise BackendUnavailable(f"backend unreachable: {exc}") from exc
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise BackendUnavailable("backend sent a non-JSON response") from exc
        if not isinstance(doc, dict) or not isinstance(doc.get("text"), str):
            raise BackendUnavailable("backend response has no 'text' field")
        return doc["text"]


# -- deterministic stub -------------------------------------------------------------

def boundary_values(t: AbiType) -> list:
    """Boundary palette for one ABI type; the stub draws arguments from it."""
    k = t.kind
    if k in ("uint", "int"):
        hi = t.max_value
        vals = {0, 1, hi}
        vals.update((1 << b) - 1 for b in (8, 32, 64, 128, t.bits) if (1 << b) - 1 <= hi)
        vals.add(MAGIC % (hi + 1))
        if k == "int":
            vals.update({-1, t.min_value})
        return sorted(vals)
    if k == "address":
        return ["@0", "@1", "@2", "@self", 0, 1]
    if k == "bool":
        return [False, True]
    if k == "fixed_bytes":
        return ["0x" + "00" * t.bits, "0x" + "ff" * t.bits, "0x" + MAGIC.to_bytes(32, "big")[:t.bits].hex()]
    if k == "bytes":
        return ["0x", "0x00", "0x" + MAGIC.to_bytes(32, "big").hex()]
    if k == "string":
        return ['""', '"a"', '"llamafuzz"']
    return ["[]"] if t.length is None else ["[" + ",".join(["0"] * t.length) + "]"]


@dataclass(frozen=True)
class _Fn:
    name: str
    types: tuple[AbiType, ...]
    mutability: str

    @property
    def signature(self) -> str:
        return f"{self.name}({','.join(t.canonical() for t in self.types)})"


def _parse_function_lines(prompt: str) -> list[_Fn]:
    fns = []
    for line in prompt.splitlines():
        if line.startswith("FUNCTION "):
            parts = line.split()
            sig, mut = parts[1], parts[2] if len(parts) > 2 else "nonpayable"
            name, rest = sig.split("(", 1)
            types = tuple(parse_type(t) for t in rest[:-1].split(",") if t)
            fns.append(_Fn(name, types, mut))
    return fns


def _directive(prompt: str, key: str, default: str | None = None) -> str | None:
    for line in prompt.splitlines():
        if line.startswith(key + " "):
            return line[len(key) + 1:].strip()
    return default


class StubBackend:
    """Model-free generator reading the machine-readable lines of our prompts.

    Output is a pure function of the prompt text and ``seed``.
    """

    name = "stub"

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def _rng(self, prompt: str) -> random.Random:
        h = hashlib.sha256(f"{self.seed}\x00{prompt}".encode()).digest()
        return random.Random(int.from_bytes(h[:8], "big"))

    def complete(self, prompt: str, max_tokens: int = 1024, temperature: float = 0.7) -> str:
        task = _directive(prompt, "TASK", "")
        if task == "abstract":
            return self._abstract(prompt)
        if task == "sequences":
            return self._sequences(prompt)
        if task == "edge-cases":
            return self._edge_cases(prompt)
        return ""

    @staticmethod
    def _abstract(prompt: str) -> str:
        lines = []
        for fn in _parse_function_lines(prompt):
            if fn.mutability == "payable":
                kind = "payable state-modifying function"
            elif fn.mutability == "view":
                kind = "read-only view function"
            else:
                kind = "state-modifying function"
            lines.append(f"{fn.signature}: {kind} {fn.signature}")
        return "\n".join(lines)

    def _sequences(self, prompt: str) -> str:
        fns = _parse_function_lines(prompt)
        if not fns:
            return ""
        rng = self._rng(prompt)
        count = int(_directive(prompt, "COUNT", "1"))
        accounts = int(_directive(prompt, "ACCOUNTS", "3"))
        hint = _directive(prompt, "HINT-KEY")
        attacker = int(_directive(prompt, "ATTACKER", str(accounts - 1)))
        blocks = []
        n = len(fns)
        for j in range(count):
            length = rng.randint(1, 4)
            if hint == "chain-dependent-calls":
                length = max(length, 2)
            chosen = [fns[(j + t) % n] for t in range(length)]
            if hint == "modify-state" and all(f.mutability == "view" for f in chosen):
                writers = [f for f in fns if f.mutability != "view"]
                if writers:
                    chosen[rng.randrange(length)] = writers[j % len(writers)]
            if hint == "reenter-via-fallback" and n > 1:
                payable = [f for f in fns if f.mutability == "payable"]
                if payable:
                    chosen = [payable[j % len(payable)]] + chosen[:3]
            lines = []
            for fn in chosen:
                args = []
                for t in fn.types:
                    pool = boundary_values(t)
                    if hint == "exercise-arithmetic-boundaries" and t.kind in ("uint", "int"):
                        pool = [t.max_value, t.max_value - 1, 1, 0]
                    args.append(str(rng.choice(pool)))
                value = 0
                if fn.mutability == "payable":
                    value = ETHER if hint == "transfer-ether" else rng.choice(PAYABLE_VALUES)
                sender = rng.randrange(accounts)
                if hint in ("escalate-privilege", "reenter-via-fallback"):
                    sender = attacker
                lines.append(f"{fn.name}({','.join(args)}) value={value} from={sender}")
            blocks.append("\n".join(lines))
        return "\n---\n".join(blocks)

    def _edge_cases(self, prompt: str) -> str:
        rng = self._rng(prompt)
        fns = {f.name: f for f in _parse_function_lines(prompt)}
        out_blocks = []
        block: list[str] = []
        in_seqs = False
        for line in prompt.splitlines() + ["---"]:
            if line.strip() == "BEGIN SEQUENCES":
                in_seqs = True
                continue
            if line.strip() == "END SEQUENCES":
                in_seqs = False
                line = "---"
            if not in_seqs and line.strip() != "---":
                continue
            if line.strip() == "---":
                if block:
                    out_blocks.append("\n".join(block))
                block = []
                continue
            name = line.split("(", 1)[0].strip()
            fn = fns.get(name)
            if fn is None:
                continue
            args = []
            for t in fn.types:
                if t.kind in ("uint", "int"):
                    args.append(str(rng.choice([t.max_value, t.max_value - 1, t.min_value, 2, 0])))
                else:
                    args.append(str(rng.choice(boundary_values(t))))
            value = rng.choice((ETHER, 2 * ETHER, 1)) if fn.mutability == "payable" else 0
            sender = rng.randrange(int(_directive(prompt, "ACCOUNTS", "3")))
            block.append(f"{name}({','.join(args)}) value={value} from={sender}")
        return "\n---\n".join(out_blocks)
