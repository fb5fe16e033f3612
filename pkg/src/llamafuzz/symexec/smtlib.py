"""Optional external solver: SMT-LIB v2 (QF_BV) over a child-process pipe.

Keccak nodes become unconstrained fresh bitvectors, so a model may rely on
a hash value no preimage produces; every model is therefore re-checked by
concrete evaluation and demoted to ``Unknown`` when the check fails.
"""

from __future__ import annotations

import re
import shutil
import subprocess
from dataclasses import dataclass
from typing import Mapping, Sequence

from .expr import WORD_MASK, Expr
from .solver import Constraint, SolveResult, Status, satisfied

_BV = "(_ BitVec 256)"
_ZERO = "(_ bv0 256)"
_ONE = "(_ bv1 256)"
_BIN = {"add": "bvadd", "sub": "bvsub", "mul": "bvmul", "and": "bvand", "or": "bvor", "xor": "bvxor"}
_CMP = {"lt": "bvult", "gt": "bvugt", "slt": "bvslt", "sgt": "bvsgt"}
_VALUE = re.compile(r"\(\s*\|([^|]+)\|\s+#x([0-9a-fA-F]+)\s*\)")


class SolverUnavailable(Exception):
    pass


def _lit(v: int) -> str:
    return f"#x{v & WORD_MASK:064x}"


def _q(name: str) -> str:
    return f"|{name}|"


def to_smtlib(constraints: Sequence[Constraint], domains: Mapping[str, tuple[int, int]]) -> tuple[str, list[str]]:
    """Render a satisfiability query; returns the script and the queried symbol names."""
    decls: list[str] = []
    defs: list[str] = []
    names: dict[int, str] = {}
    syms: list[str] = []

    def term(e: Expr) -> str:
        key = id(e)
        if key in names:
            return names[key]
        tag = e[0]
        if tag == "const":
            return _lit(e[1])
        if tag == "sym":
            if e[1] not in syms:
                syms.append(e[1])
                decls.append(f"(declare-fun {_q(e[1])} () {_BV})")
            return _q(e[1])
        if tag == "keccak":
            for p in e[1]:
                if not isinstance(p, bytes):
                    term(p)
            name = f"|keccak!{len(names)}|"
            decls.append(f"(declare-fun {name} () {_BV})")
            names[key] = name
            return name
        args = [term(x) for x in e[1:]]
        if tag in _BIN:
            body = f"({_BIN[tag]} {args[0]} {args[1]})"
        elif tag in _CMP:
            body = f"(ite ({_CMP[tag]} {args[0]} {args[1]}) {_ONE} {_ZERO})"
        elif tag == "eq":
            body = f"(ite (= {args[0]} {args[1]}) {_ONE} {_ZERO})"
        elif tag == "iszero":
            body = f"(ite (= {args[0]} {_ZERO}) {_ONE} {_ZERO})"
        elif tag == "not":
            body = f"(bvnot {args[0]})"
        elif tag in ("div", "mod", "sdiv"):
            fn = {"div": "bvudiv", "mod": "bvurem", "sdiv": "bvsdiv"}[tag]
            body = f"(ite (= {args[1]} {_ZERO}) {_ZERO} ({fn} {args[0]} {args[1]}))"
        elif tag == "shl":  # operands: shift, value
            body = f"(bvshl {args[1]} {args[0]})"
        elif tag == "shr":
            body = f"(bvlshr {args[1]} {args[0]})"
        elif tag == "byte":
            body = (f"(ite (bvult {args[0]} (_ bv32 256)) (bvand (bvlshr {args[1]} "
                    f"(bvmul (bvsub (_ bv31 256) {args[0]}) (_ bv8 256))) (_ bv255 256)) {_ZERO})")
        else:
            raise ValueError(f"cannot render operator {tag}")
        name = f"|t!{len(names)}|"
        names[key] = name
        defs.append(f"(define-fun {name} () {_BV} {body})")
        return name

    asserts = []
    for e, want in constraints:
        t = term(e)
        asserts.append(f"(assert (not (= {t} {_ZERO})))" if want else f"(assert (= {t} {_ZERO}))")
    for s in syms:
        lo, hi = domains.get(s, (0, WORD_MASK))
        if lo > 0:
            asserts.append(f"(assert (bvuge {_q(s)} {_lit(lo)}))")
        if hi < WORD_MASK:
            asserts.append(f"(assert (bvule {_q(s)} {_lit(hi)}))")
    lines = ["(set-logic QF_BV)", "(set-option :produce-models true)", *decls, *defs, *asserts, "(check-sat)"]
    if syms:
        lines.append("(get-value (" + " ".join(_q(s) for s in syms) + "))")
    lines.append("(exit)")
    return "\n".join(lines) + "\n", syms


@dataclass
class SmtSolver:
    binary: str = "z3"
    args: tuple[str, ...] = ("-in", "-smt2")

    def __post_init__(self) -> None:
        path = shutil.which(self.binary)
        if path is None:
            raise SolverUnavailable(f"solver binary {self.binary!r} not found")
        self.path = path

    def solve(self, constraints: Sequence[Constraint], values: Mapping[str, int],
              domains: Mapping[str, tuple[int, int]], budget_ms: int = 5000) -> SolveResult:
        script, syms = to_smtlib(constraints, domains)
        try:
            proc = subprocess.run([self.path, *self.args], input=script, capture_output=True,
                                  text=True, timeout=max(budget_ms, 1) / 1000)
        except subprocess.TimeoutExpired:
            return SolveResult(Status.UNKNOWN)
        out = proc.stdout.strip()
        head = out.split(None, 1)[0] if out else ""
        if head == "unsat":
            return SolveResult(Status.UNSAT)
        if head != "sat":
            return SolveResult(Status.UNKNOWN)
        model = {m.group(1): int(m.group(2), 16) for m in _VALUE.finditer(out)}
        env = dict(values)
        env.update({s: model[s] for s in syms if s in model})
        if not satisfied(constraints, env):
            return SolveResult(Status.UNKNOWN)
        return SolveResult(Status.SAT, env, 1)
