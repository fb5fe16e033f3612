"""Seed generation through a layered prompting pipeline over a pluggable backend."""

from .backends import BackendUnavailable, LlmBackend, RemoteBackend, StubBackend, boundary_values
from .hints import HINT_POOL, HintInjector, PromptHint, fired_condition, inject_hint
from .pipeline import GenerationStats, abstract_functions, generate_seeds, infer_sequences, verify
from .prompts import FunctionSummary, UnparseableOutput, parse_call_line, parse_sequences

__all__ = [
    "HINT_POOL", "BackendUnavailable", "FunctionSummary", "GenerationStats", "HintInjector",
    "LlmBackend", "PromptHint", "RemoteBackend", "StubBackend", "UnparseableOutput",
    "abstract_functions", "boundary_values", "fired_condition", "generate_seeds",
    "infer_sequences", "inject_hint", "parse_call_line", "parse_sequences", "verify",
]
