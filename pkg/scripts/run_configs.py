"""Run every YAML config in scripts/configs (or the ones named) and print verdicts.

    python3 scripts/run_configs.py [--out DIR] [name.yaml ...]
"""
import argparse
import sys
import time
from pathlib import Path

from faddeevlab.experiments import parse_config, run_experiment

HERE = Path(__file__).resolve().parent / "configs"
VERDICT = {0: "PASS", 1: "FAIL", 2: "ABORT"}


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("names", nargs="*")
    ap.add_argument("--out", default="runs")
    args = ap.parse_args(argv)
    paths = [HERE / n for n in args.names] if args.names else sorted(HERE.glob("*.yaml"))
    worst = 0
    for p in paths:
        t0 = time.perf_counter()
        status, _ = run_experiment(parse_config(p), out=Path(args.out) / p.stem)
        worst = max(worst, status)
        print(f"{p.name:28s} {VERDICT[status]:5s} {time.perf_counter() - t0:8.1f} s", flush=True)
    return worst


if __name__ == "__main__":
    sys.exit(main())
