"""Command-line interface: run experiments, derive CDFs, verify invariants, inspect drops.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .harness import ConfigError, derive_stream, load_config, run_experiment, write_cdf_csvs
from .scenario import build_scenario


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cfsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config, writing rates CSV + summary JSON")
    run.add_argument("config", help="path to the experiment JSON config")

    cdf = sub.add_parser("cdf", help="derive per-scheme CDF CSVs from a rates CSV")
    cdf.add_argument("rates_csv", help="rates CSV produced by `run`")
    cdf.add_argument("--out-dir", default=None, help="directory for the CDF CSVs")

    ver = sub.add_parser("verify", help="run the finite-oracle and invariant suite")
    ver.add_argument("--quiet", action="store_true", help="only print failures")

    scen = sub.add_parser("scenario", help="dump one drop's gains and powers as JSON")
    scen.add_argument("config", help="path to the experiment JSON config")
    scen.add_argument("--drop", type=int, default=0, help="drop index to rebuild")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if not config.output_path:
        raise ConfigError("output_path: required by the run command")
    result = run_experiment(config)
    for scheme, stats in result.summary["schemes"].items():
        print(f"{scheme}: median {stats['percentiles']['p50']:.4f} bit/s/Hz "
              f"over {stats['count']} records")
    print(f"wrote {result.csv_path} and {result.summary_path}")
    return 0


def _cmd_cdf(args) -> int:
    written = write_cdf_csvs(args.rates_csv, args.out_dir)
    for scheme, path in sorted(written.items()):
        print(f"{scheme}: {path}")
    return 0


def _cmd_verify(args) -> int:
    from .verification import run_all

    failures = 0
    for check in run_all():
        status = "PASS" if check.passed else "FAIL"
        if not check.passed or not args.quiet:
            detail = f" ({check.detail})" if check.detail else ""
            print(f"{status} {check.name}{detail}")
        failures += 0 if check.passed else 1
    if failures:
        print(f"{failures} verification check(s) failed", file=sys.stderr)
        return 3
    return 0


def _cmd_scenario(args) -> int:
    config = load_config(args.config)
    scen = build_scenario(config.network,
                          derive_stream(config.master_seed, args.drop, 0, 0, "scenario"))
    doc = {
        "drop_id": args.drop,
        "ap_positions": scen.ap_positions.tolist(),
        "ue_positions": scen.ue_positions.tolist(),
        "gains": scen.gains.tolist(),
        "p": scen.p.tolist(),
        "sigma": scen.sigma.tolist(),
        "sum_p": float(np.sum(scen.p)),
    }
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "cdf": _cmd_cdf, "verify": _cmd_verify,
                "scenario": _cmd_scenario}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - surface anything else as a runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
