"""Layered seed generation: summarise functions, propose sequences, verify
them against the ABI, then ask once more for edge-case variants.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from ..abi import FunctionDescriptor, RawCall, UnknownFunction, ValidatedCall, validate_call
from ..bundle import Bundle
from ..corpus import Origin, Seed, Transaction, TxEnv
from .backends import BackendUnavailable, LlmBackend, StubBackend
from .hints import PromptHint
from .prompts import (
    FunctionSummary,
    UnparseableOutput,
    abstraction_prompt,
    edge_case_prompt,
    parse_sequences,
    parse_summaries,
    sequence_prompt,
)

log = logging.getLogger(__name__)

MAX_SEQ_LEN = 8
_ACCOUNT_REF = re.compile(r"^@(\d+|self)$")


@dataclass
class GenerationStats:
    proposed: int = 0  # sequences returned by the backend(s)
    dropped_lines: int = 0  # calls rejected by ABI verification
    fallbacks: int = 0  # rounds served by the stub after a backend failure


def _ask(backend: LlmBackend, prompt: str, fallback: LlmBackend | None,
         stats: GenerationStats | None, parse: Callable[[str], list]) -> tuple[list, LlmBackend]:
    """One round: try ``backend`` twice, then the fallback; parse the answer."""
    last: Exception | None = None
    for _ in range(2):
        try:
            parsed = parse(backend.complete(prompt))
            if parsed:
                return parsed, backend
            last = UnparseableOutput("no usable output")
        except BackendUnavailable as exc:
            last = exc
            log.warning("backend %s unavailable: %s", backend.name, exc)
        if backend is fallback:
            break
    if fallback is None or fallback is backend:
        raise last
    if stats is not None:
        stats.fallbacks += 1
    parsed = parse(fallback.complete(prompt))
    if not parsed:
        raise UnparseableOutput("fallback produced no usable output")
    return parsed, fallback


def abstract_functions(abi: Sequence[FunctionDescriptor], backend: LlmBackend,
                       fallback: LlmBackend | None = None,
                       stats: GenerationStats | None = None) -> list[FunctionSummary]:
    if not abi:
        raise UnparseableOutput("ABI has no functions")
    prompt = abstraction_prompt(abi)
    summaries, _ = _ask(backend, prompt, fallback, stats, lambda text: parse_summaries(text, abi))
    # Functions the model skipped still get a templated summary.
    have = {s.fd.signature for s in summaries}
    return summaries + [FunctionSummary(fd, f"{fd.mutability} function {fd.signature}")
                        for fd in abi if fd.signature not in have]


def infer_sequences(summaries: Sequence[FunctionSummary], backend: LlmBackend, hint: PromptHint | None = None,
                    count: int = 8, n_accounts: int = 3, attacker: int | None = None,
                    fallback: LlmBackend | None = None,
                    stats: GenerationStats | None = None) -> list[list[RawCall]]:
    return _infer(summaries, backend, hint, count, n_accounts, attacker, fallback, stats)[0]


def _infer(summaries, backend, hint, count, n_accounts, attacker, fallback, stats):
    """``infer_sequences`` that also reports which backend produced the answer."""
    if not summaries:
        raise UnparseableOutput("no functions to call")
    prompt = sequence_prompt(summaries, count, n_accounts, hint.text if hint else None,
                             hint.key if hint else None, attacker)
    seqs, served_by = _ask(backend, prompt, fallback, stats, parse_sequences)
    if stats is not None:
        stats.proposed += len(seqs)
    return seqs, served_by


def _resolve_refs(bundle: Bundle, raw: RawCall) -> RawCall:
    args = []
    for a in raw.args:
        m = _ACCOUNT_REF.match(a.strip())
        if m:
            ref = m.group(1)
            addr = bundle.address if ref == "self" else bundle.accounts[int(ref) % len(bundle.accounts)]
            a = hex(addr)
        args.append(a)
    return RawCall(raw.name, tuple(args), raw.value, raw.sender)


def verify(bundle: Bundle, seqs: Sequence[Sequence[RawCall]],
           stats: GenerationStats | None = None) -> list[tuple[list[RawCall], list[ValidatedCall]]]:
    """ABI-check every call; invalid calls are dropped, empty sequences vanish."""
    out = []
    n = len(bundle.accounts)
    for seq in seqs:
        raws, valid = [], []
        for raw in seq[:MAX_SEQ_LEN]:
            raw = _resolve_refs(bundle, raw)
            try:
                res = validate_call(bundle.abi, raw, n)
            except UnknownFunction:
                res = None
            if isinstance(res, ValidatedCall):
                raws.append(raw)
                valid.append(res)
            elif stats is not None:
                stats.dropped_lines += 1
        if valid:
            out.append((raws, valid))
    return out


def to_seed(calls: Sequence[ValidatedCall], origin: Origin) -> Seed:
    return Seed(tuple(Transaction(c.fd.signature, c.args, c.sender, c.value, TxEnv.at(i))
                      for i, c in enumerate(calls)), origin)


def generate_seeds(bundle: Bundle, backend: LlmBackend | None, count: int,
                   hint: PromptHint | None = None, rng_seed: int = 0,
                   allow_stub_fallback: bool = True,
                   stats: GenerationStats | None = None) -> list[Seed]:
    """Produce exactly ``count`` ABI-valid seeds (fewer only if the ABI is unusable)."""
    if count <= 0:
        return []
    stub = StubBackend(rng_seed)
    backend = backend or stub
    fallback = stub if allow_stub_fallback else None
    stats = stats if stats is not None else GenerationStats()
    n_acc = len(bundle.accounts)
    attacker = bundle.roles.attackers[0] if bundle.roles.attackers else None

    summaries = abstract_functions(bundle.abi, backend, fallback, stats)
    origin = Origin.STUB if backend is stub else Origin.LLM
    try:
        seqs, served_by = _infer(summaries, backend, hint, count, n_acc, attacker, fallback, stats)
        if served_by is stub:
            origin = Origin.STUB
    except UnparseableOutput:
        if fallback is None:
            raise
        seqs = []
    survivors = verify(bundle, seqs, stats)
    if not survivors and fallback is not None and backend is not stub:
        stats.fallbacks += 1
        origin = Origin.STUB
        seqs = infer_sequences(summaries, stub, hint, count, n_acc, attacker, None, stats)
        survivors = verify(bundle, seqs, stats)

    variants: list[tuple[list[RawCall], list[ValidatedCall]]] = []
    if survivors:
        prompt = edge_case_prompt(summaries, [r for r, _ in survivors], n_acc)
        try:
            edge, _ = _ask(backend, prompt, fallback, stats, parse_sequences)
            variants = verify(bundle, edge, stats)
        except (UnparseableOutput, BackendUnavailable):
            variants = []

    # Interleave originals with their edge-case variants, deduplicating by id.
    seeds: list[Seed] = []
    seen: set[str] = set()

    def add(calls: Sequence[ValidatedCall], o: Origin) -> None:
        s = to_seed(calls, o)
        if s.id not in seen and len(seeds) < count:
            seen.add(s.id)
            seeds.append(s)

    for i in range(max(len(survivors), len(variants))):
        if i < len(survivors):
            add(survivors[i][1], origin)
        if i < len(variants):
            add(variants[i][1], origin)

    # Top up from the stub with fresh prompts until the quota is met.
    round_ = 0
    while len(seeds) < count and fallback is not None and round_ < 16:
        round_ += 1
        extra = StubBackend(rng_seed * 1_000_003 + round_)
        seqs = infer_sequences(summaries, extra, hint, count - len(seeds), n_acc, attacker, None, stats)
        for _, calls in verify(bundle, seqs, stats):
            add(calls, Origin.STUB)
    return seeds
