#!/usr/bin/env python3
"""Median-rate sweep over the aging coefficient at desk scale.

Prints one row per r value so the crossover between centralized and local
precoding (and the team scheme's robustness to it) is visible at a glance.
"""

import argparse

import numpy as np

from cfsim.channel import AgingModel
from cfsim.harness import ExperimentConfig, run_experiment
from cfsim.precoding import SCHEMES
from cfsim.scenario import NetworkConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--r", type=float, nargs="+",
                        default=[0.5, 0.8, 0.9, 0.95, 0.99, 1.0])
    parser.add_argument("--drops", type=int, default=5)
    parser.add_argument("--realizations", type=int, default=30)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    print("r      " + "".join(f"{s:>17s}" for s in SCHEMES))
    for r in args.r:
        config = ExperimentConfig(
            network=NetworkConfig(L=4, N=2, K=8),
            aging=AgingModel(r=r),
            schemes=SCHEMES,
            drops=args.drops,
            realizations_per_drop=args.realizations,
            master_seed=args.seed,
            pi_samples=100,
        )
        result = run_experiment(config)
        medians = [result.summary["schemes"][s]["percentiles"]["p50"] for s in SCHEMES]
        print(f"{r:5.3f} " + "".join(f"{m:17.3f}" for m in medians))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
