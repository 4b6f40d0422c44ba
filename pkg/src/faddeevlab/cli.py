"""Command line: ``faddeevlab <kind> --config PATH [--out DIR] [--resume PATH] ...``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

THREADS_ENV = "FADDEEVLAB_THREADS"


def build_parser():
    from .experiments import KINDS

    p = argparse.ArgumentParser(prog="faddeevlab", description="Run one experiment.")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", help="YAML config; its 'kind' must match the subcommand if given")
    p.add_argument("--out", help="output directory (default: config 'out')")
    p.add_argument("--resume", help="checkpoint file to resume from")
    p.add_argument("--threads", type=int, default=None,
                   help=f"numba threads (default: ${THREADS_ENV} or all cores)")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    threads = args.threads or (int(os.environ[THREADS_ENV]) if os.environ.get(THREADS_ENV) else None)
    if threads:
        import numba

        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))

    from .experiments import ConfigError, parse_config, run_experiment

    raw = {}
    if args.config:
        import yaml

        with open(args.config) as fh:
            raw = yaml.safe_load(fh) or {}
        if raw.get("kind", args.kind) != args.kind:
            print(f"config kind {raw['kind']!r} does not match subcommand {args.kind!r}", file=sys.stderr)
            return 2
    raw["kind"] = args.kind
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        cfg = parse_config(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"config": cfg.as_dict()}, sort_keys=True))
    status, summary = run_experiment(cfg, out=args.out, resume=args.resume)
    verdict = "PASS" if status == 0 else ("FAIL" if status == 1 else "ABORT")
    print(f"{cfg.kind}: {verdict}")
    if "abort" in summary:
        print(json.dumps(summary["abort"]), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
