#!/usr/bin/env python3
"""Run every built-in experiment for p = 2..4 and print a summary.

    python scripts/run_experiments.py --out results --refinements 4
"""
import argparse
import os
import sys
import time

from nondivdg.experiments import RunConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--refinements", type=int, default=4)
    ap.add_argument("--degrees", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--experiments", nargs="+",
                    default=["exp1", "exp2", "exp3", "consistency"])
    args = ap.parse_args()

    summary = []
    for name in args.experiments:
        degrees = [2] if name == "consistency" else args.degrees
        for p in degrees:
            refs = 3 if name == "consistency" else args.refinements
            cfg = RunConfig(experiment=name, degree=p, refinements=refs,
                            output_dir=os.path.join(args.out, name))
            t0 = time.perf_counter()
            res = run_experiment(cfg)
            dt = time.perf_counter() - t0
            summary.append((name, p, res.passed, dt, "; ".join(res.messages)))
    print()
    for name, p, ok, dt, msg in summary:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<12} p={p}  {dt:7.1f} s  {msg}")
    return 0 if all(s[2] for s in summary) else 1


if __name__ == "__main__":
    sys.exit(main())
