"""Instrumented execution of the supported EVM subset."""

from .interpreter import Call, Frame, UnknownOpcode, execute_sequence, execute_transaction
from .state import (
    ADDRESS_MASK,
    WORD_MASK,
    WORD_MOD,
    Account,
    Bytecode,
    CounterpartyScript,
    Environment,
    ScriptedCall,
    WorldState,
)
from .trace import (
    BehaviorMetrics,
    CallRecord,
    ExecutionTrace,
    Fault,
    behavior_metrics,
)

__all__ = [
    "ADDRESS_MASK", "WORD_MASK", "WORD_MOD", "Account", "BehaviorMetrics", "Bytecode", "Call",
    "CallRecord", "CounterpartyScript", "Environment", "ExecutionTrace", "Fault", "Frame",
    "ScriptedCall", "UnknownOpcode", "WorldState", "behavior_metrics", "execute_sequence",
    "execute_transaction",
]
