#!/usr/bin/env python3
"""Run the desk-scale sampler comparison and print a summary table.

Writes the full bundle (traces, comparison.csv, acf.csv, mpsrf.csv,
manifest.json) to --out and prints per-algorithm efficiency numbers.
Runs in well under a minute on a laptop.
"""

import argparse
from pathlib import Path

from sglmm_mcmc.harness import DESK_ROSTER, ExperimentConfig, run_comparison


def print_table(result) -> None:
    header = f"{'algorithm':<28}{'h':>12}{'accept':>9}{'mESS':>12}{'MSJD':>13}{'wall s':>9}  status"
    print(header)
    print("-" * len(header))
    for r in result.results:
        if r.error is not None:
            print(f"{r.tag:<28}{'':>12}{'':>9}{'':>12}{'':>13}{'':>9}  {r.error}")
            continue
        acc = "" if r.acceptance_rate is None else f"{r.acceptance_rate:.3f}"
        mess = "" if r.report.mess_value is None else f"{r.report.mess_value:.1f}"
        print(
            f"{r.tag:<28}{r.step_size:>12.3e}{acc:>9}{mess:>12}"
            f"{r.report.msjd_value:>13.4e}{r.wall_time:>9.1f}  ok"
        )
    if any(r.rhat is not None for r in result.results):
        print("\nMPSRF over multiple starts:")
        for r in result.results:
            if r.rhat is None:
                continue
            cross = r.rhat.first_below(1.1)
            print(f"  {r.tag:<26} final={r.rhat.final():.4f}  first below 1.1 at {cross}")
    print(f"\nbundle written to {result.out_dir}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("desk-comparison"))
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--starts", type=int, default=3)
    parser.add_argument(
        "--roster",
        default=",".join(DESK_ROSTER),
        help="comma-separated algorithm[:preconditioner] entries",
    )
    args = parser.parse_args(argv)

    config = ExperimentConfig.desk_profile(
        seed=args.seed,
        start_count=args.starts,
        algorithms=tuple(args.roster.split(",")),
    )
    print_table(run_comparison(config, args.out))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
