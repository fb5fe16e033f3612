"""Plain-text rendering of a campaign output directory."""

from __future__ import annotations

import csv
import json
from collections import Counter
from pathlib import Path


def _table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def load_outputs(out_dir: str | Path) -> tuple[dict, list[dict], list[dict], list[dict]]:
    d = Path(out_dir)
    summary = json.loads((d / "campaign.json").read_text())
    with open(d / "coverage.csv", newline="") as fh:
        coverage = list(csv.DictReader(fh))
    with open(d / "operators.csv", newline="") as fh:
        operators = list(csv.DictReader(fh))
    bugs = [json.loads(line) for line in (d / "bugs.jsonl").read_text().splitlines() if line.strip()]
    return summary, coverage, operators, bugs


def render(out_dir: str | Path, plot_points: int = 20) -> str:
    summary, coverage, operators, bugs = load_outputs(out_dir)
    parts = [
        f"bundle {summary['bundle']}: {summary['generations']} generations, {summary['execs']} executions, "
        f"{summary['wall_time']:.1f} s",
        f"coverage: {summary['instr_covered']} instructions, {summary['branch_covered']} branch edges, "
        f"{summary['raw_pairs']} RAW pairs",
        "",
        "bugs by class",
        _table(["class", "count"], sorted(Counter(b["class"] for b in bugs).items()) or [["-", 0]]),
        "",
        "findings",
        _table(["class", "address", "pc", "tx", "generation", "seed"],
               [[b["class"], b["address"], b["pc"], b["tx"], b.get("generation", ""), b["seed"][:12]]
                for b in bugs]) if bugs else "(none)",
        "",
    ]
    last_gen = operators[-1]["generation"] if operators else None
    final_ops = [[o["operator"], o["p"], o["fit"]] for o in operators if o["generation"] == last_gen]
    parts += ["final operator distribution", _table(["operator", "p", "fit"], final_ops), ""]
    step = max(1, len(coverage) // plot_points)
    series = coverage[::step]
    if coverage and series[-1] is not coverage[-1]:
        series.append(coverage[-1])
    parts += ["coverage over generations (plot data)",
              _table(["generation", "instr", "branch", "raw", "events"],
                     [[r["generation"], r["instr_covered"], r["branch_covered"], r["raw_pairs"], r["events"]]
                      for r in series])]
    triggers = summary.get("triggers", [])
    if triggers:
        parts += ["", "stagnation triggers: " + ", ".join(f"{t['trigger']}@{t['generation']}" for t in triggers)]
    return "\n".join(parts) + "\n"
