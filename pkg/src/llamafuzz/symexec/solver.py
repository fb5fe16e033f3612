"""Bounded-effort constraint solving over the expression language.

The built-in solver never claims more than it knows: ``Unsat`` is reported
only when single-symbol facts (bounds, equalities, exclusions) contradict
each other; ``Sat`` only for an assignment that concretely satisfies every
constraint. Everything else is ``Unknown``.
"""

from __future__ import annotations

import enum
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from .expr import WORD_MASK, WORD_MOD, Expr, constants, evaluate, symbols

Constraint = tuple[Expr, bool]  # (expression, whether it must be non-zero)
DEFAULT_TRIALS = 4096
MAX_TRIALS = 1 << 16


class Status(str, enum.Enum):
    SAT = "Sat"
    UNSAT = "Unsat"
    UNKNOWN = "Unknown"


@dataclass
class SolveResult:
    status: Status
    assignment: dict[str, int] = field(default_factory=dict)
    trials: int = 0


class Solver(Protocol):
    def solve(self, constraints: Sequence[Constraint], values: Mapping[str, int],
              domains: Mapping[str, tuple[int, int]], budget_ms: int) -> SolveResult:
        ...


def satisfied(constraints: Iterable[Constraint], env: Mapping[str, int]) -> bool:
    cache: dict = {}
    return all((evaluate(e, env, cache) != 0) == want for e, want in constraints)


# -- single-symbol facts ------------------------------------------------------------

@dataclass
class _Facts:
    lo: int
    hi: int
    eq: set[int] = field(default_factory=set)
    ne: set[int] = field(default_factory=set)

    def contradictory(self) -> bool:
        if self.lo > self.hi or len(self.eq) > 1:
            return True
        if self.eq:
            v = next(iter(self.eq))
            return not self.lo <= v <= self.hi or v in self.ne
        span = self.hi - self.lo + 1
        return span <= len(self.ne) and all(v in self.ne for v in range(self.lo, self.hi + 1))


def _atom(e: Expr, want: bool) -> tuple[str, str, int] | None:
    """Reduce a constraint to (symbol, relation, constant) when it has that shape."""
    tag = e[0]
    if tag == "sym":
        return (e[1], "ne" if want else "eq", 0)
    if tag == "iszero":
        return _atom(e[1], not want)
    if tag in ("lt", "gt", "eq") and len(e) == 3:
        a, b = e[1], e[2]
        if a[0] == "sym" and b[0] == "const":
            s, c, rel = a[1], b[1], tag
        elif a[0] == "const" and b[0] == "sym":
            s, c, rel = b[1], a[1], {"lt": "gt", "gt": "lt", "eq": "eq"}[tag]
        else:
            return None
        if not want:
            rel = {"lt": "ge", "gt": "le", "eq": "ne"}[rel]
        return (s, rel, c)
    return None


def _facts(constraints: Sequence[Constraint], domains: Mapping[str, tuple[int, int]]) -> dict[str, _Facts]:
    facts: dict[str, _Facts] = {}
    for e, want in constraints:
        atom = _atom(e, want)
        if atom is None:
            continue
        s, rel, c = atom
        f = facts.setdefault(s, _Facts(*domains.get(s, (0, WORD_MASK))))
        if rel == "lt":
            f.hi = min(f.hi, c - 1)
        elif rel == "le":
            f.hi = min(f.hi, c)
        elif rel == "gt":
            f.lo = max(f.lo, c + 1)
        elif rel == "ge":
            f.lo = max(f.lo, c)
        elif rel == "eq":
            f.eq.add(c)
        else:
            f.ne.add(c)
    return facts


# -- candidate generation ----------------------------------------------------------

def _inv(k: int) -> int | None:
    return pow(k, -1, WORD_MOD) if k & 1 else None


def _invert(e: Expr, target: int, env: Mapping[str, int], out: dict[str, set[int]], depth: int = 0) -> None:
    """Propose symbol values making ``e`` evaluate to ``target`` (best effort)."""
    if depth > 24:
        return
    tag = e[0]
    if tag == "sym":
        out.setdefault(e[1], set()).add(target & WORD_MASK)
        return
    if tag in ("const", "keccak"):
        return
    if tag in ("not", "iszero"):
        x = e[1]
        if tag == "not":
            _invert(x, WORD_MASK ^ target, env, out, depth + 1)
        elif target:
            _invert(x, 0, env, out, depth + 1)
        else:
            cur = evaluate(x, env)
            _invert(x, cur if cur else 1, env, out, depth + 1)
            _invert(x, 1, env, out, depth + 1)
        return
    a, b = e[1], e[2]
    sa, sb = bool(symbols(a)), bool(symbols(b))
    va, vb = evaluate(a, env), evaluate(b, env)
    t = target & WORD_MASK
    if tag in ("lt", "gt", "slt", "sgt", "eq"):
        # choose a value for one side relative to the other side's current value
        moves = {
            ("lt", 1): (lambda o: o - 1, lambda o: o + 1),
            ("lt", 0): (lambda o: o, lambda o: o),
            ("gt", 1): (lambda o: o + 1, lambda o: o - 1),
            ("gt", 0): (lambda o: o, lambda o: o),
            ("slt", 1): (lambda o: o - 1, lambda o: o + 1),
            ("slt", 0): (lambda o: o, lambda o: o),
            ("sgt", 1): (lambda o: o + 1, lambda o: o - 1),
            ("sgt", 0): (lambda o: o, lambda o: o),
            ("eq", 1): (lambda o: o, lambda o: o),
            ("eq", 0): (lambda o: o + 1, lambda o: o + 1),
        }
        for_a, for_b = moves[(tag, 1 if t else 0)]
        if sa:
            _invert(a, for_a(vb) & WORD_MASK, env, out, depth + 1)
            if tag in ("lt", "gt", "slt", "sgt"):
                _invert(a, 0 if tag in ("lt", "slt") else WORD_MASK, env, out, depth + 1)
        if sb:
            _invert(b, for_b(va) & WORD_MASK, env, out, depth + 1)
        return
    # when both sides are symbolic, solve for the left one holding the right fixed
    if sa:
        x, k, left = a, vb, True
    elif sb:
        x, k, left = b, va, False
    else:
        return
    cands: list[int] = []
    if tag == "add":
        cands = [t - k]
    elif tag == "sub":
        cands = [t + k] if left else [k - t]
    elif tag == "xor":
        cands = [t ^ k]
    elif tag == "mul":
        inv = _inv(k)
        if inv is not None:
            cands = [t * inv]
        elif k and t % k == 0:
            cands = [t // k, t // k + (WORD_MOD // (k & -k))]
    elif tag == "div" and left:
        cands = [t * k] if k else []
    elif tag == "div":
        cands = [k // t] if t else [k + 1]
    elif tag == "mod" and left:
        cands = [t] if t < k else []
    elif tag == "and":
        cur = evaluate(x, env)
        if t & ~k & WORD_MASK == 0:
            cands = [(cur & ~k) | t, t]
    elif tag == "or":
        if t & k == k:
            cands = [t & ~k, t]
    elif tag == "shr":  # a = shift, b = value
        if not left and va < 256:
            cur = evaluate(x, env)
            cands = [(t << va) | (cur & ((1 << va) - 1))]
    elif tag == "shl":
        if not left and va < 256 and t & ((1 << va) - 1) == 0:
            cands = [t >> va]
    elif tag == "byte":
        if not left and va < 32:
            cur = evaluate(x, env)
            sh = 8 * (31 - va)
            cands = [(cur & ~(0xFF << sh)) | ((t & 0xFF) << sh)]
    for c in cands:
        _invert(x, c & WORD_MASK, env, out, depth + 1)


def _candidates(constraints: Sequence[Constraint], env: Mapping[str, int],
                facts: Mapping[str, _Facts]) -> dict[str, list[int]]:
    out: dict[str, set[int]] = {}
    for e, want in constraints:
        if (evaluate(e, env) != 0) == want:
            continue
        _invert(e, 1 if want else 0, env, out)
    for s, f in facts.items():
        pool = out.setdefault(s, set())
        pool.update(f.eq)
        pool.update({f.lo, f.hi, f.lo + 1, f.hi - 1})
        pool.update(v + d for v in f.ne for d in (-1, 1))
    for e, _ in constraints:
        syms = symbols(e)
        consts = constants(e)
        for s in syms:
            pool = out.setdefault(s, set())
            for c in consts:
                pool.update({c, c - 1, c + 1})
    return {s: sorted(v & WORD_MASK for v in vals) for s, vals in out.items()}


# -- the built-in solver --------------------------------------------------------------

@dataclass
class BuiltinSolver:
    max_trials: int = DEFAULT_TRIALS
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.max_trials <= MAX_TRIALS:
            raise ValueError(f"max_trials must lie in [1, {MAX_TRIALS}]")

    def solve(self, constraints: Sequence[Constraint], values: Mapping[str, int],
              domains: Mapping[str, tuple[int, int]], budget_ms: int = 5000) -> SolveResult:
        deadline = time.monotonic() + budget_ms / 1000
        free = sorted(set().union(*(symbols(e) for e, _ in constraints)) if constraints else set())
        env = {s: values.get(s, 0) for s in set(values) | set(free)}
        trials = 0

        def inside(s: str, v: int) -> bool:
            lo, hi = domains.get(s, (0, WORD_MASK))
            return lo <= v <= hi

        # Ground constraints (no symbols) decide themselves.
        ground = [(e, w) for e, w in constraints if not symbols(e)]
        if ground and not satisfied(ground, {}):
            return SolveResult(Status.UNSAT)
        facts = _facts(constraints, domains)
        if any(f.contradictory() for f in facts.values()):
            return SolveResult(Status.UNSAT)
        if satisfied(constraints, env):
            return SolveResult(Status.SAT, dict(env), 0)

        rng = random.Random(self.rng_seed)
        tried: set[tuple] = set()

        def attempt(changes: Mapping[str, int]) -> dict[str, int] | None:
            nonlocal trials
            if any(not inside(s, v) for s, v in changes.items()):
                return None
            key = tuple(sorted(changes.items()))
            if key in tried:
                return None
            tried.add(key)
            trials += 1
            cand = dict(env)
            cand.update(changes)
            return cand if satisfied(constraints, cand) else None

        def exhausted() -> bool:
            return trials >= self.max_trials or time.monotonic() > deadline

        # 1. Local repair: follow inverted candidates, one symbol at a time, a few rounds deep.
        current: dict[str, int] = {}
        for _ in range(8):
            cand_env = dict(env)
            cand_env.update(current)
            pools = _candidates(constraints, cand_env, facts)
            for s in free:
                for v in pools.get(s, ()):
                    if exhausted():
                        return SolveResult(Status.UNKNOWN, trials=trials)
                    change = dict(current)
                    change[s] = v
                    hit = attempt(change)
                    if hit is not None:
                        return SolveResult(Status.SAT, hit, trials)
            # take the first candidate that fixes the most constraints and continue from there
            best, best_score = None, _score(constraints, cand_env)
            for s in free:
                for v in pools.get(s, ())[:64]:
                    if not inside(s, v):
                        continue
                    trial_env = dict(cand_env)
                    trial_env[s] = v
                    sc = _score(constraints, trial_env)
                    if sc > best_score:
                        best, best_score = (s, v), sc
            if best is None:
                break
            current[best[0]] = best[1]

        # 2. Products of candidate pools across symbols.
        pools = _candidates(constraints, env, facts)
        if 1 < len(free) <= 4:
            combos = [[]]
            for s in free:
                vals = pools.get(s, [])[:16] or [env[s]]
                combos = [c + [(s, v)] for c in combos for v in vals]
                if len(combos) > self.max_trials:
                    break
            for combo in combos:
                if exhausted():
                    return SolveResult(Status.UNKNOWN, trials=trials)
                hit = attempt(dict(combo))
                if hit is not None:
                    return SolveResult(Status.SAT, hit, trials)

        # 3. Random and byte-wise enumeration around the current values.
        byte_moves = [(s, i, b) for s in free for i in range(32) for b in range(256)]
        bi = 0
        spins = 0  # proposals, including duplicates that cost no trial
        while not exhausted() and spins < 4 * self.max_trials:
            spins += 1
            if byte_moves and trials % 2 == 0 and bi < len(byte_moves):
                s, i, b = byte_moves[bi]
                bi += 1
                sh = 8 * i
                change = {s: (env[s] & ~(0xFF << sh)) | (b << sh)}
            else:
                change = {}
                for s in free:
                    lo, hi = domains.get(s, (0, WORD_MASK))
                    r = rng.random()
                    pool = pools.get(s)
                    if pool and r < 0.4:
                        change[s] = rng.choice(pool)
                    elif r < 0.7:
                        change[s] = rng.randint(lo, min(hi, lo + 1024))
                    else:
                        change[s] = rng.randint(lo, hi)
            hit = attempt(change)
            if hit is not None:
                return SolveResult(Status.SAT, hit, trials)
        return SolveResult(Status.UNKNOWN, trials=trials)


def _score(constraints: Sequence[Constraint], env: Mapping[str, int]) -> int:
    cache: dict = {}
    return sum((evaluate(e, env, cache) != 0) == want for e, want in constraints)
