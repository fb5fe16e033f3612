"""Hybrid smart-contract fuzzer.

An instrumented EVM-subset interpreter drives a genetic search over
transaction sequences. Seeds come from a (stub-capable) language-model
prompting pipeline, mutation operators are scheduled adaptively, symbolic
execution is invoked only when coverage stalls, and ten runtime oracles
classify the resulting traces.
"""

__version__ = "0.1.0"
