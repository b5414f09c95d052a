#!/usr/bin/env python3
"""Run bundled (or file) experiment plans and write their CSVs.

    python scripts/run_plans.py                   # every bundled plan
    python scripts/run_plans.py table6 --trials 50 --out results
"""

import argparse
import time

from lcac.experiments import ExperimentPlan, run_plan
from lcac.profiles import bundled_plans


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("plans", nargs="*", help="plan names or JSON paths (default: all bundled)")
    ap.add_argument("--out", default="results")
    ap.add_argument("--trials", type=int, help="override the plan trial count")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    for ref in args.plans or bundled_plans():
        plan = ExperimentPlan.load(ref)
        if args.trials:
            plan.trials = args.trials
        t0 = time.perf_counter()
        out = run_plan(plan, args.out, args.workers)
        print(f"{plan.name}: {plan.trials} trials/cell in {time.perf_counter() - t0:.1f}s -> {out.paths['summary']}")
        print(out.summary_csv)


if __name__ == "__main__":
    main()
