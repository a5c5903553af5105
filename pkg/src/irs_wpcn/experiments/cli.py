"""Command-line entry point ``irs-wpcn``.

::

    irs-wpcn run --config cfg.json --out results.csv [--trials n] [--seed n]
                 [--variants Proposed,SdrPhase] [--sweep elements]
    irs-wpcn summarize results.csv

Exit codes: 0 success, 2 invalid config, 3 every run infeasible.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from ..errors import ConfigInvalid
from .config import SWEEPS, load_config
from .runner import read_results, run_experiment, summarize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_INFEASIBLE = 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irs-wpcn", description="Robust IRS-assisted WPCN beamforming experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a sweep and write a results CSV")
    run.add_argument("--config", required=True, help="JSON scenario file (an empty file gives the defaults)")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--trials", type=int, help="override the number of trials")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--variants", help="comma-separated subset of the variants")
    run.add_argument("--sweep", choices=SWEEPS, help="sweep to run with its preset grid")
    run.add_argument("--workers", type=int, help="parallel worker processes")
    summ = sub.add_parser("summarize", help="print per-point means of a results CSV")
    summ.add_argument("results")
    return ap


def _print_summary(rows, out) -> None:
    s = summarize(rows)
    name = rows[0]["sweep_name"] if rows else ""
    print(f"sweep {name}; {s.paired_count} trials feasible for every variant and value", file=out)
    print(f"{'value':>12} {'variant':>12} {'n':>4} {'mean_J':>12} {'stderr_J':>12} {'paired_J':>12}", file=out)
    for v in s.values:
        for var in s.variants:
            print(
                f"{v:>12.6g} {var:>12} {s.count[(v, var)]:>4d} {s.mean[(v, var)]:>12.6g} {s.stderr[(v, var)]:>12.4g} {s.paired_mean[(v, var)]:>12.6g}",
                file=out,
            )
        if not math.isnan(s.gain[v]):
            print(f"{v:>12.6g} {'gain':>12} {'':>4} {s.gain[v]:>12.6g}", file=out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "summarize":
        _print_summary(read_results(args.results), sys.stdout)
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        variants = [v.strip() for v in args.variants.split(",") if v.strip()] if args.variants else None
        cfg = cfg.with_overrides(trials=args.trials, master_seed=args.seed, variants=variants, sweep=args.sweep, workers=args.workers)
    except ConfigInvalid as exc:
        for path, msg in exc.errors:
            print(f"config error: {path}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = run_experiment(cfg, args.out)
    if rows and all(r["infeasible_stage"] for r in rows):
        print("every run was infeasible", file=sys.stderr)
        return EXIT_ALL_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
