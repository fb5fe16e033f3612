"""Behavior-guided hints appended to the sequence-generation prompt."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..vm.trace import BehaviorMetrics

SHALLOW_DEPTH = 2  # d < 2: no nested calls observed
NEAR_ZERO_RATIO = 0.05


@dataclass(frozen=True)
class PromptHint:
    key: str
    text: str
    trigger: str = ""  # "state", "depth" or "ratio"


HINT_POOL: tuple[PromptHint, ...] = (
    PromptHint("modify-state", "Generate a transaction that modifies contract state"),
    PromptHint("transfer-ether", "Include calls that send ether to the contract or make it pay ether out"),
    PromptHint("reenter-via-fallback",
               "Order calls so an external call can re-enter the contract before its bookkeeping is updated"),
    PromptHint("escalate-privilege", "Call privileged or owner-only functions from an ordinary account"),
    PromptHint("exercise-arithmetic-boundaries",
               "Use integer arguments at type boundaries such as 0, 1 and the maximum value"),
    PromptHint("chain-dependent-calls", "Chain calls so that later calls read state written by earlier ones"),
)
_BY_KEY = {h.key: h for h in HINT_POOL}

CONDITION_KEYS: dict[str, tuple[str, ...]] = {
    "state": ("modify-state",),
    "depth": ("reenter-via-fallback", "chain-dependent-calls", "exercise-arithmetic-boundaries"),
    "ratio": ("transfer-ether", "escalate-privilege"),
}


def fired_condition(m: BehaviorMetrics) -> str | None:
    """The highest-priority deficit among: no writes, shallow depth, rare transfers."""
    if m.s == 0:
        return "state"
    if m.d < SHALLOW_DEPTH:
        return "depth"
    if m.r < NEAR_ZERO_RATIO:
        return "ratio"
    return None


@dataclass
class HintInjector:
    """Round-robin hint selection with one cursor per condition."""

    cursors: dict[str, int] = field(default_factory=dict)

    def __call__(self, m: BehaviorMetrics) -> PromptHint | None:
        cond = fired_condition(m)
        if cond is None:
            return None
        keys = CONDITION_KEYS[cond]
        i = self.cursors.get(cond, 0)
        self.cursors[cond] = i + 1
        base = _BY_KEY[keys[i % len(keys)]]
        return PromptHint(base.key, base.text, cond)


_default_injector = HintInjector()


def inject_hint(metrics: BehaviorMetrics, injector: HintInjector | None = None) -> PromptHint | None:
    return (injector or _default_injector)(metrics)
