"""Command-line interface.

Exit codes: 0 no findings, 1 findings reported, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .bundle import BundleError, load_bundle
from .campaign import run_campaign, write_outputs
from .config import CampaignConfig, ConfigError, load_config
from .corpus import CorruptCorpus, execute_seed, load_seed_file, persist, seed_to_json
from .llmgen import BackendUnavailable, RemoteBackend, generate_seeds
from .oracles import detect_all
from .report import render

EXIT_OK, EXIT_BUGS, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; keep it but raise for main()
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="llamafuzz", description="Hybrid smart-contract fuzzer.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fuzz", help="run a fuzzing campaign on a bundle")
    f.add_argument("bundle")
    f.add_argument("--config", help="TOML file with campaign settings")
    f.add_argument("--seed", type=int, dest="rng_seed")
    f.add_argument("--budget-secs", type=float)
    f.add_argument("--max-generations", type=int)
    f.add_argument("--max-execs", type=int)
    f.add_argument("--no-lsg", action="store_true", help="random seeding instead of the generation pipeline")
    f.add_argument("--no-mos", action="store_true", help="uniform operators and random selection")
    f.add_argument("--no-hfe", action="store_true", help="disable symbolic execution")
    f.add_argument("--solver", choices=("builtin", "smt"))
    f.add_argument("--out", help="output directory")

    r = sub.add_parser("replay", help="re-execute one seed and run the oracles")
    r.add_argument("seed_file")
    r.add_argument("bundle")

    c = sub.add_parser("corpus", help="seed corpus utilities")
    csub = c.add_subparsers(dest="corpus_command", required=True, parser_class=_Parser)
    g = csub.add_parser("gen", help="run only the seeding stage")
    g.add_argument("bundle")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0, dest="rng_seed")
    g.add_argument("--out", help="persist the seeds to this directory")

    rep = sub.add_parser("report", help="summarise a campaign output directory")
    rep.add_argument("out_dir")
    return p


def _config(args) -> CampaignConfig:
    base = load_config(args.config) if args.config else CampaignConfig()
    cfg = base.with_overrides(rng_seed=args.rng_seed, budget_secs=args.budget_secs,
                              max_generations=args.max_generations, max_execs=args.max_execs,
                              solver=args.solver)
    if args.max_generations is not None or args.max_execs is not None:
        if args.budget_secs is None and not args.config:
            cfg = cfg.with_overrides(budget_secs=0)
    flags = {k: True for k in ("no_lsg", "no_mos", "no_hfe") if getattr(args, k)}
    cfg = cfg.with_overrides(**flags) if flags else cfg
    if cfg.llm_endpoint is None:
        backend = RemoteBackend.from_env(cfg.llm_timeout)
        if backend is not None:
            cfg = cfg.with_overrides(llm_endpoint=backend.endpoint, llm_token=backend.token)
    return cfg


def _fuzz(args) -> int:
    cfg = _config(args)
    bundle = load_bundle(args.bundle)
    progress = None
    if args.verbose:
        def progress(g):
            print(f"gen {g.generation:4d}  branches {g.branch_covered:4d}  instrs {g.instr_covered:5d}  "
                  f"bugs {g.bugs}  {' '.join(g.events)}", file=sys.stderr)
    result = run_campaign(bundle, cfg, progress=progress)
    if args.out:
        write_outputs(result, args.out)
    summary = result.summary()
    print(f"{bundle.name}: {summary['generations']} generations, {summary['execs']} executions, "
          f"{summary['branch_covered']} branch edges, {summary['instr_covered']} instructions")
    for bug in result.bugs:
        print(f"  {bug.bug_class.value} at {bug.address:#x}:{bug.pc} (tx {bug.tx_index}) - {bug.description}")
    return EXIT_BUGS if result.bugs else EXIT_OK


def _replay(args) -> int:
    bundle = load_bundle(args.bundle)
    seed = load_seed_file(args.seed_file)
    run = execute_seed(bundle, seed)
    print(f"seed {seed.id} ({seed.origin.value}, {len(seed)} transactions)")
    for i, (tx, t) in enumerate(zip(seed.txs, run.traces)):
        status = t.exception.value if t.exception else "ok"
        print(f"  tx {i}: {tx.function} from #{tx.sender} value={tx.value} -> {status} "
              f"gas={t.gas_used} instrs={len(t.instr_sites)} branches={len(t.branch_edges)} "
              f"sstores={len(t.storage_writes)} calls={len(t.external_calls)} digest={t.digest()[:16]}")
    bugs = detect_all(run.traces, run.pre_state, run.post_state, bundle, seed)
    for bug in bugs:
        print(f"  finding {bug.bug_class.value} at {bug.address:#x}:{bug.pc} (tx {bug.tx_index}) - "
              f"{bug.description}")
    if not bugs:
        print("  no findings")
    return EXIT_BUGS if bugs else EXIT_OK


def _corpus_gen(args) -> int:
    bundle = load_bundle(args.bundle)
    backend = RemoteBackend.from_env()
    seeds = generate_seeds(bundle, backend, args.count, rng_seed=args.rng_seed)
    if args.out:
        persist(seeds, args.out)
    for s in seeds:
        print(json.dumps(seed_to_json(s), sort_keys=True))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fuzz":
            return _fuzz(args)
        if args.command == "replay":
            return _replay(args)
        if args.command == "corpus":
            return _corpus_gen(args)
        print(render(args.out_dir), end="")
        return EXIT_OK
    except (ConfigError, BundleError, CorruptCorpus, BackendUnavailable) as exc:
        print(f"llamafuzz: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"llamafuzz: cannot read input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
