#!/usr/bin/env python3
"""End-to-end driver: run a config, then derive per-scheme CDF CSVs.

Example:
    python scripts/run_experiment.py configs/desk.json
    CFSIM_WORKERS=8 python scripts/run_experiment.py configs/fig2a.json
"""

import argparse

from cfsim.harness import load_config, run_experiment, write_cdf_csvs


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config", help="experiment JSON config")
    parser.add_argument("--workers", type=int, default=None,
                        help="process count (default: CFSIM_WORKERS or 1)")
    args = parser.parse_args()

    config = load_config(args.config)
    result = run_experiment(config, workers=args.workers)
    print(f"rates:   {result.csv_path}")
    print(f"summary: {result.summary_path}")
    for scheme, stats in result.summary["schemes"].items():
        pct = stats["percentiles"]
        print(f"  {scheme:16s} p10 {pct['p10']:.3f}  median {pct['p50']:.3f}  "
              f"p90 {pct['p90']:.3f}  (n={stats['count']})")
    if result.csv_path is not None:
        for scheme, path in sorted(write_cdf_csvs(result.csv_path).items()):
            print(f"cdf[{scheme}]: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
