"""Campaign configuration and its TOML loader."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CampaignConfig:
    # genetic engine
    mu: int = 50
    gamma: float = 0.25
    seq_len_max: int = 8
    # seeding and pre-fuzz ranking
    seed_count: int = 200
    lam: float = 0.5
    rho: float = 0.1
    k_max: int = 32
    # operator scheduler
    sigma: float = 0.05
    decay: float = 0.9
    # termination: whichever limit is hit first
    budget_secs: float | None = 60.0
    max_generations: int | None = None
    max_execs: int | None = None
    rng_seed: int = 0
    # ablations
    no_lsg: bool = False
    no_mos: bool = False
    no_hfe: bool = False
    # symbolic execution
    solver: str = "builtin"  # "builtin" or "smt"
    solver_path: str = "z3"
    solver_trials: int = 4096
    symbolic_flips: int = 20
    symbolic_secs: float = 5.0
    node_budget: int = 100_000
    # text-generation backend
    llm_endpoint: str | None = None
    llm_token: str | None = None
    llm_timeout: float = 30.0
    allow_stub_fallback: bool = True

    def __post_init__(self) -> None:
        if self.budget_secs is not None and self.budget_secs <= 0:
            object.__setattr__(self, "budget_secs", None)  # 0 disables the wall-clock limit
        self.validate()

    @property
    def elite_count(self) -> int:
        return math.ceil(self.gamma * self.mu)

    def validate(self) -> None:
        if self.mu < 2:
            raise ConfigError("mu must be at least 2")
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.gamma * self.mu < 1:
            raise ConfigError("gamma * mu must be at least 1")
        if self.elite_count >= self.mu:
            raise ConfigError("gamma leaves no room for offspring")
        if self.seq_len_max < 1:
            raise ConfigError("seq_len_max must be positive")
        if self.seed_count < 1:
            raise ConfigError("seed_count must be positive")
        if not 0 < self.rho < 1 or self.k_max < 1:
            raise ConfigError("rho must lie in (0, 1) and k_max be positive")
        if self.lam < 0 or self.sigma < 0 or not 0 <= self.decay <= 1:
            raise ConfigError("lam and sigma must be non-negative, decay in [0, 1]")
        if self.budget_secs is None and self.max_generations is None and self.max_execs is None:
            raise ConfigError("at least one budget (seconds, generations, executions) is required")
        if self.solver not in ("builtin", "smt"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if not 1 <= self.solver_trials <= 1 << 16:
            raise ConfigError("solver_trials must lie in [1, 65536]")

    def with_overrides(self, **changes: Any) -> "CampaignConfig":
        try:
            return replace(self, **{k: v for k, v in changes.items() if v is not None})
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc.pop("llm_token")
        return doc


def load_config(path: str | Path, base: CampaignConfig | None = None) -> CampaignConfig:
    """Read a TOML file; keys may sit at top level or under a ``[campaign]`` table."""
    try:
        doc = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    doc = doc.get("campaign", doc)
    known = {f.name for f in fields(CampaignConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    return (base or CampaignConfig()).with_overrides(**doc)
