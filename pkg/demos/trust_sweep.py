#!/usr/bin/env python3
"""Run the demo experiment plan and summarize it by solver and trust level.

The CSV is written next to the plan; the summary shows the mean
consistency and robustness ratios and how many rows failed a certificate.
"""
import csv
import statistics
import sys
from collections import defaultdict
from pathlib import Path

from onlineadvice.harness import ExperimentPlan, run_sweep

HERE = Path(__file__).resolve().parent


def _mean(vals):
    vals = [float(v) for v in vals if v != ""]
    return statistics.fmean(vals) if vals else float("nan")


def main(out=HERE / "sweep.csv"):
    plan = ExperimentPlan.load(HERE / "plans" / "sweep.json")
    run_sweep(plan, out=out)
    rows = list(csv.DictReader(open(out)))
    groups = defaultdict(list)
    for r in rows:
        groups[(r["solver"], r["advice_mode"], r["lambda"])].append(r)
    flags = ["certified_consistency", "certified_robustness", "certified_duality", "certified_feasibility"]
    print(f"{'solver':<18} {'advice':<14} {'lambda':>6} {'rows':>5} {'consistency':>12} {'robustness':>11} {'failed':>7}")
    for (solver, mode, lam), rs in sorted(groups.items()):
        failed = sum(any(r[f] == "false" for f in flags) for r in rs)
        print(f"{solver:<18} {mode:<14} {float(lam):6.2f} {len(rs):5d} "
              f"{_mean(r['consistency_ratio'] for r in rs):12.4f} {_mean(r['robustness_ratio'] for r in rs):11.4f} {failed:7d}")
    print(f"\n{len(rows)} rows written to {out}", file=sys.stderr)


if __name__ == "__main__":
    main()
