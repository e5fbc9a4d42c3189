#!/usr/bin/env python3
"""Run the full-size sampler comparison (m=350 sites, 150k iterations,
five starts, the complete thirteen-entry roster) and print a summary table.

This is the expensive experiment; budget hours, not minutes. Shrink it with
--m / --iterations for a dry run, or use scripts/desk_comparison.py.
"""

import argparse
from pathlib import Path

from desk_comparison import print_table

from sglmm_mcmc.harness import ExperimentConfig, run_comparison


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("full-comparison"))
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--m", type=int, default=None, help="number of observation sites")
    parser.add_argument("--iterations", type=int, default=None)
    parser.add_argument("--family", choices=["binomial_logit", "poisson_log"], default=None)
    args = parser.parse_args(argv)

    overrides = {"seed": args.seed}
    for key in ("m", "iterations", "family"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    config = ExperimentConfig.paper_profile(**overrides)
    print_table(run_comparison(config, args.out))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
