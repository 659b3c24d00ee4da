"""Run the four shipped experiments at their default sizes.

Writes one CSV plus one config/summary sidecar per experiment into --out.
The full set takes a couple of minutes on one core; pass --only to run a
subset, e.g. --only stability --only privacy-utility.
"""

import argparse
import sys
import time

from dpsgld.harness import EXPERIMENTS, default_config, run_experiment, write_results


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results", help="output directory (default: results)")
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument(
        "--only",
        action="append",
        choices=EXPERIMENTS,
        help="run just this experiment (repeatable; default: all four)",
    )
    args = parser.parse_args(argv)

    names = tuple(args.only) if args.only else EXPERIMENTS
    for name in names:
        config = default_config(name, seed=args.seed, out_dir=args.out)
        start = time.perf_counter()
        rows, summary = run_experiment(config)
        elapsed = time.perf_counter() - start
        csv_path, sidecar_path = write_results(config, rows, summary, elapsed_seconds=elapsed)
        print(f"{name}: {len(rows)} rows in {elapsed:.1f}s -> {csv_path}")
        for key in sorted(summary):
            print(f"  {key} = {summary[key]}")
        print(f"  sidecar = {sidecar_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
