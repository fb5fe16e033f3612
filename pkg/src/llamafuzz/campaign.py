"""The fuzzing campaign: seeding, generational evolution, oracles and stagnation handling."""

from __future__ import annotations

import csv
import json
import logging
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .abi import AbiType, FunctionDescriptor
from .bundle import ETHER, Bundle
from .config import CampaignConfig
from .corpus import (
    Origin,
    Seed,
    TopKConfig,
    Transaction,
    TxEnv,
    execute_seed,
    persist,
    raw_links_of,
    score_traces,
    select_top_k,
)
from .feedback import GlobalCoverage, StagnationDetector, Trigger, commit, deltas, trace_edges
from .llmgen import BackendUnavailable, HintInjector, PromptHint, RemoteBackend, generate_seeds
from .mutate import OperatorScheduler, crossover_raw_aware, mutate_with
from .oracles import DIFFERENTIAL, BugClass, BugReport, detect_all
from .symexec import BuiltinSolver, SmtSolver, explore
from .vm import ExecutionTrace, UnknownOpcode, behavior_metrics

log = logging.getLogger(__name__)

Edge = tuple[int, int, bool]


@dataclass
class GenerationReport:
    generation: int
    best_fit: int
    mean_fit: float
    instr_covered: int
    branch_covered: int
    raw_pairs: int
    bugs: int
    execs: int
    elapsed: float
    events: list[str] = field(default_factory=list)
    operators: list[tuple[str, float, float]] = field(default_factory=list)


@dataclass
class Discovery:
    generation: int
    execs: int
    elapsed: float


@dataclass
class CampaignResult:
    bundle: str
    config: CampaignConfig
    coverage: GlobalCoverage
    bugs: list[BugReport]
    bug_found: list[Discovery]
    population: list[Seed]
    scheduler: OperatorScheduler
    generations: list[GenerationReport]
    triggers: list[tuple[int, str, float]]  # (generation, trigger, elapsed seconds)
    edge_found: dict[Edge, Discovery]
    execs: int
    wall_time: float
    symbolic_seeds: int = 0

    @property
    def bug_classes(self) -> set[str]:
        return {b.bug_class.value for b in self.bugs}

    def first_trigger(self, kind: Trigger) -> tuple[int, str, float] | None:
        return next((t for t in self.triggers if t[1] == kind.value), None)

    def summary(self) -> dict:
        instr, branch, raw = self.coverage.totals()
        return {
            "bundle": self.bundle,
            "generations": len(self.generations),
            "execs": self.execs,
            "wall_time": round(self.wall_time, 3),
            "instr_covered": instr,
            "branch_covered": branch,
            "raw_pairs": raw,
            "bugs": len(self.bugs),
            "bug_classes": sorted(self.bug_classes),
            "triggers": [{"generation": g, "trigger": t} for g, t, _ in self.triggers],
            "symbolic_seeds": self.symbolic_seeds,
            "operators": {name: p for name, _, p in self.scheduler.snapshot()},
            "config": self.config.to_json(),
        }


# -- random valid seeds ---------------------------------------------------------------

def random_value(t: AbiType, rng: random.Random, bundle: Bundle) -> Any:
    k = t.kind
    if k == "uint":
        return rng.getrandbits(t.bits)
    if k == "int":
        return rng.randint(t.min_value, t.max_value)
    if k == "address":
        return rng.choice((*bundle.accounts, bundle.address))
    if k == "bool":
        return rng.random() < 0.5
    if k == "fixed_bytes":
        return bytes(rng.getrandbits(8) for _ in range(t.bits))
    if k == "bytes":
        return bytes(rng.getrandbits(8) for _ in range(rng.randrange(0, 65)))
    if k == "string":
        return "".join(rng.choice("abcdefxyz0123") for _ in range(rng.randrange(0, 17)))
    n = t.length if t.length is not None else rng.randrange(0, 4)
    return tuple(random_value(t.elem, rng, bundle) for _ in range(n))


def random_call(fd: FunctionDescriptor, rng: random.Random, bundle: Bundle, position: int) -> Transaction:
    value = rng.choice((0, 1, rng.randrange(ETHER + 1))) if fd.payable else 0
    return Transaction(fd.signature, tuple(random_value(t, rng, bundle) for t in fd.inputs),
                       rng.randrange(len(bundle.accounts)), value, TxEnv.at(position))


def random_seed(bundle: Bundle, rng: random.Random, max_len: int = 4) -> Seed:
    n = rng.randint(1, max_len)
    return Seed(tuple(random_call(rng.choice(bundle.abi), rng, bundle, i) for i in range(n)), Origin.RANDOM)


# -- the campaign ---------------------------------------------------------------------

class Campaign:
    """One campaign over one bundle; ``run`` drives it to the configured budget."""

    def __init__(self, bundle: Bundle, cfg: CampaignConfig,
                 backend=None, progress: Callable[[GenerationReport], None] | None = None) -> None:
        self.bundle = bundle
        self.cfg = cfg
        self.rng = random.Random(cfg.rng_seed)
        self.coverage = GlobalCoverage()
        self.scheduler = OperatorScheduler(sigma=cfg.sigma, decay=cfg.decay, uniform_only=cfg.no_mos)
        self.detector = StagnationDetector()
        self.injector = HintInjector()
        self.backend = backend
        if self.backend is None and cfg.llm_endpoint:
            self.backend = RemoteBackend(cfg.llm_endpoint, cfg.llm_token, cfg.llm_timeout)
        self.solver = (SmtSolver(cfg.solver_path) if cfg.solver == "smt"
                       else BuiltinSolver(cfg.solver_trials, cfg.rng_seed))
        self.progress = progress
        self.bugs: list[BugReport] = []
        self.bug_found: list[Discovery] = []
        self._bug_keys: set = set()
        self.edge_found: dict[Edge, Discovery] = {}
        self.generations: list[GenerationReport] = []
        self.triggers: list[tuple[int, str, float]] = []
        self.failed_flips: set = set()
        self.execs = 0
        self.generation = 0
        self.symbolic_seeds = 0
        self.hint: PromptHint | None = None
        self._gen_traces: list[ExecutionTrace] = []
        self._start = 0.0
        self._reseeds = 0

    # -- budget -----------------------------------------------------------
    def elapsed(self) -> float:
        return time.monotonic() - self._start

    def exhausted(self) -> bool:
        c = self.cfg
        if c.budget_secs is not None and self.elapsed() >= c.budget_secs:
            return True
        if c.max_execs is not None and self.execs >= c.max_execs:
            return True
        return c.max_generations is not None and self.generation >= c.max_generations

    # -- evaluation ---------------------------------------------------------
    def evaluate(self, seed: Seed) -> bool:
        """Execute, score, commit coverage and run the oracles; False drops the seed."""
        try:
            run = execute_seed(self.bundle, seed)
        except (UnknownOpcode, RecursionError, ValueError) as exc:
            log.warning("dropping seed %s: %s", seed.id, exc)
            return False
        self.execs += 1
        rec = deltas(run.traces, self.coverage)
        seed.fitness = rec
        seed.fit = max(seed.fit, rec.fit)
        seed.raw_links = raw_links_of(run.traces)
        if rec.delta_branch:
            stamp = Discovery(self.generation, self.execs, self.elapsed())
            for e in trace_edges(run.traces) - self.coverage.branch_edges:
                self.edge_found[e] = stamp
        commit(self.coverage, run.traces)
        self._gen_traces.extend(run.traces)
        known = {BugClass(c) for c in self.bug_classes()} & DIFFERENTIAL
        for rep in detect_all(run.traces, run.pre_state, run.post_state, self.bundle, seed, skip=known):
            if rep.key not in self._bug_keys:
                self._bug_keys.add(rep.key)
                self.bugs.append(rep)
                self.bug_found.append(Discovery(self.generation, self.execs, self.elapsed()))
        return True

    def bug_classes(self) -> set[str]:
        return {b.bug_class.value for b in self.bugs}

    # -- seeding ------------------------------------------------------------
    def candidates(self) -> list[Seed]:
        cfg = self.cfg
        n = cfg.seed_count
        if cfg.no_lsg:
            return [random_seed(self.bundle, self.rng) for _ in range(n)]
        stub_seed = cfg.rng_seed * 7919 + self._reseeds
        try:
            return generate_seeds(self.bundle, self.backend, n, self.hint, stub_seed, cfg.allow_stub_fallback)
        except BackendUnavailable:
            raise
        except Exception as exc:  # a misbehaving backend must not stop the campaign
            log.warning("seed generation failed (%s); using random seeds", exc)
            return [random_seed(self.bundle, self.rng) for _ in range(n)]

    def seed_population(self) -> list[Seed]:
        cfg = self.cfg
        scored = []
        for s in self.candidates():
            try:
                traces = execute_seed(self.bundle, s).traces
            except UnknownOpcode:
                continue
            self.execs += 1
            scored.append((s, score_traces(traces, cfg.lam)))
        pop = select_top_k(scored, TopKConfig(cfg.rho, cfg.k_max)) if scored else []
        pop = pop[:cfg.mu]
        while len(pop) < cfg.mu:
            pop.append(random_seed(self.bundle, self.rng))
        self._reseeds += 1
        out = []
        for s in pop:
            s.fit = 0
            if self.evaluate(s):
                out.append(s)
        return self._fill(out)

    def _fill(self, pop: list[Seed]) -> list[Seed]:
        guard = 0
        while len(pop) < self.cfg.mu and guard < 10 * self.cfg.mu:
            guard += 1
            s = random_seed(self.bundle, self.rng)
            if self.evaluate(s):
                pop.append(s)
        return pop

    # -- one generation -------------------------------------------------------
    @staticmethod
    def rank(pop: list[Seed]) -> list[Seed]:
        return sorted(pop, key=lambda s: (-s.fit, s.id))

    def select_elites(self, pop: list[Seed]) -> list[Seed]:
        k = self.cfg.elite_count
        if self.cfg.no_mos:
            return self.rng.sample(pop, k)
        return self.rank(pop)[:k]

    def breed(self, elites: list[Seed], pop: list[Seed]) -> list[Seed]:
        cfg, rng, sch = self.cfg, self.rng, self.scheduler
        parents = pop if cfg.no_mos else elites
        children: list[Seed] = []
        need = cfg.mu - len(elites)
        while len(children) < need:
            if self.children_budget_gone():
                break
            if len(parents) > 1:
                a, b = rng.sample(parents, 2)
            else:
                a = b = parents[0]
            for c in crossover_raw_aware(a, b, rng, cfg.seq_len_max):
                if len(children) >= need:
                    break
                ops = sch.sample(rng)
                child, used = mutate_with(ops, c, self.bundle, rng, resample=lambda: sch.sample(rng)[0])
                if not self.evaluate(child):
                    continue
                if used:
                    sch.credit(used, child.fitness.delta_branch, child.fitness.delta_inst)
                children.append(child)
        # a budget cut mid-generation keeps |P| = mu by cloning elites
        i = 0
        while len(children) < need:
            children.append(elites[i % len(elites)])
            i += 1
        return children

    def children_budget_gone(self) -> bool:
        c = self.cfg
        if c.budget_secs is not None and self.elapsed() >= c.budget_secs:
            return True
        return c.max_execs is not None and self.execs >= c.max_execs

    def symbolic_phase(self, pop: list[Seed]) -> list[Seed]:
        """Flip uncovered branches next to the best seeds' paths; returns validated seeds."""
        cfg = self.cfg
        found: list[Seed] = []
        flips_left = cfg.symbolic_flips
        deadline = time.monotonic() + cfg.symbolic_secs
        seen: set[str] = set()
        attempted: set = set()
        for s in self.rank(pop):
            if flips_left <= 0 or time.monotonic() >= deadline:
                break
            if s.id in seen:
                continue
            seen.add(s.id)
            res = explore(self.bundle, s, self.coverage, self.solver, flips_left,
                          max(0.0, deadline - time.monotonic()), cfg.node_budget, self.failed_flips, attempted)
            flips_left -= res.attempts
            found.extend(res.seeds)
        return found

    def inject(self, pop: list[Seed], extra: list[Seed]) -> list[Seed]:
        """Replace the weakest members with new seeds, keeping the population size."""
        kept = self.rank(pop)
        accepted = []
        for s in extra:
            if self.evaluate(s):
                accepted.append(s)
        if not accepted:
            return pop
        accepted = accepted[:len(kept) - self.cfg.elite_count]
        return kept[:len(kept) - len(accepted)] + accepted

    def stagnation(self, pop: list[Seed], events: list[str]) -> list[Seed]:
        trig = self.detector.check(self.coverage.totals()[1])
        if trig is None:
            return pop
        events.append(trig.value)
        self.triggers.append((self.generation, trig.value, self.elapsed()))
        if self._gen_traces:
            self.hint = self.injector(behavior_metrics(self._gen_traces))
        if trig is Trigger.SYMBOLIC:
            if not self.cfg.no_hfe:
                new = self.symbolic_phase(pop)
                self.symbolic_seeds += len(new)
                if new:
                    events.append(f"symbolic+{len(new)}")
                pop = self.inject(pop, new)
            return pop
        return self.seed_population()

    def report(self, pop: list[Seed], events: list[str]) -> GenerationReport:
        instr, branch, raw = self.coverage.totals()
        fits = [s.fit for s in pop]
        rep = GenerationReport(self.generation, max(fits), sum(fits) / len(fits), instr, branch, raw,
                               len(self.bugs), self.execs, self.elapsed(), events,
                               self.scheduler.snapshot())
        self.generations.append(rep)
        if self.progress:
            self.progress(rep)
        return rep

    # -- driver ---------------------------------------------------------------
    def run(self) -> CampaignResult:
        self._start = time.monotonic()
        pop = self.seed_population()
        self.detector.check(self.coverage.totals()[1])  # generation 0 is the growth baseline
        self.report(pop, ["seed"])
        while not self.exhausted():
            self.generation += 1
            self._gen_traces = []
            elites = self.select_elites(pop)
            pop = elites + self.breed(elites, pop)
            self.scheduler.update(self.rng)
            events: list[str] = []
            pop = self.stagnation(pop, events)
            self.report(pop, events)
        return CampaignResult(self.bundle.name, self.cfg, self.coverage, self.bugs, self.bug_found, pop,
                              self.scheduler, self.generations, self.triggers, self.edge_found,
                              self.execs, self.elapsed(), self.symbolic_seeds)


def run_campaign(bundle: Bundle, cfg: CampaignConfig, backend=None,
                 progress: Callable[[GenerationReport], None] | None = None) -> CampaignResult:
    return Campaign(bundle, cfg, backend, progress).run()


# -- outputs ----------------------------------------------------------------------------

def write_outputs(result: CampaignResult, out: str | Path) -> None:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "coverage.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generation", "instr_covered", "branch_covered", "raw_pairs", "events"])
        for g in result.generations:
            w.writerow([g.generation, g.instr_covered, g.branch_covered, g.raw_pairs, ";".join(g.events)])
    with open(d / "operators.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generation", "operator", "fit", "p"])
        for g in result.generations:
            for name, fit, p in g.operators:
                w.writerow([g.generation, name, f"{fit:.6f}", f"{p:.6f}"])
    with open(d / "bugs.jsonl", "w") as fh:
        for bug, found in zip(result.bugs, result.bug_found):
            doc = bug.to_json()
            doc["generation"] = found.generation
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
    persist(result.population, d / "corpus")
    (d / "campaign.json").write_text(json.dumps(result.summary(), indent=1, sort_keys=True) + "\n")
