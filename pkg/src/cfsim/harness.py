"""Experiment orchestration: strict JSON configs, deterministic stream derivation,
Monte-Carlo loops over drops and realizations, and CSV/JSON artifacts."""

from __future__ import annotations

import hashlib
import json
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import AgingModel, clarke_autocorrelation, sample_pair
from .evaluation import MomentAccumulator, RateRecord, aggregate_cdf, sinr_and_rate
from .precoding import (
    SCHEMES,
    SingularStage,
    build_precoder,
    local_stage_matrices,
    team_mmse_precoder,
)
from .scenario import NetworkConfig, build_scenario

WORKERS_ENV = "CFSIM_WORKERS"
CSV_HEADER = "drop_id,ue_id,scheme,rate_bits_per_hz"


class ConfigError(ValueError):
    """Malformed experiment configuration; the message names the offending key path."""


@dataclass(frozen=True)
class SeedPath:
    """Coordinates identifying one independent RNG stream.

    Distinct tuples give statistically independent streams; the same tuple
    reproduces the same stream regardless of worker count or call order.
    """

    master_seed: int
    drop_id: int = 0
    realization_id: int = 0
    ap_id: int = 0
    purpose: str = ""


def derive_stream(master_seed, drop_id: int = 0, realization_id: int = 0,
                  ap_id: int = 0, purpose: str = "") -> np.random.Generator:
    """Counter-based stream derivation: hash the seed path into a 256-bit state."""
    if isinstance(master_seed, SeedPath):
        path = master_seed
    else:
        path = SeedPath(int(master_seed), drop_id, realization_id, ap_id, purpose)
    token = f"{path.master_seed}|{path.drop_id}|{path.realization_id}|{path.ap_id}|{path.purpose}"
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return np.random.default_rng(np.random.SeedSequence(int.from_bytes(digest, "big")))


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkConfig
    aging: AgingModel
    schemes: tuple[str, ...]
    drops: int
    realizations_per_drop: int
    master_seed: int
    pi_samples: int = 200
    output_path: str | None = None

    def __post_init__(self):
        if self.drops < 1:
            raise ConfigError("drops: must be >= 1")
        if self.realizations_per_drop < 2:
            raise ConfigError("realizations_per_drop: must be >= 2")
        if not self.schemes:
            raise ConfigError("schemes: must not be empty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"schemes: unknown scheme {s!r}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("schemes: duplicate entries")
        if self.pi_samples < 1:
            raise ConfigError("pi_samples: must be >= 1")


_NETWORK_KEYS = {
    "L", "N", "K", "area_side", "ap_height_delta", "bandwidth_hz", "noise_figure_db",
    "shadow_std_db", "shadow_corr_distance_m", "sum_power_watt", "pl_slope_db",
    "pl_intercept_db", "power_exponent",
}
_AGING_KEYS = {"r", "doppler_hz", "symbol_time_s", "delay_symbols"}
_TOP_KEYS = {"network", "aging", "schemes", "drops", "realizations_per_drop",
             "pi_samples", "master_seed", "output_path"}


def _reject_unknown(doc: dict, allowed: set, prefix: str) -> None:
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}: unknown key")


def _parse_aging(doc) -> AgingModel:
    if not isinstance(doc, dict):
        raise ConfigError("aging: must be an object")
    _reject_unknown(doc, _AGING_KEYS, "aging.")
    if "r" in doc:
        if len(doc) != 1:
            raise ConfigError("aging: give either r or the Clarke triple, not both")
        try:
            return AgingModel(r=np.asarray(doc["r"], dtype=float))
        except ValueError as exc:
            raise ConfigError(f"aging.r: {exc}") from exc
    triple = ("doppler_hz", "symbol_time_s", "delay_symbols")
    if not all(k in doc for k in triple):
        raise ConfigError("aging: needs r or all of doppler_hz, symbol_time_s, delay_symbols")
    return AgingModel(r=clarke_autocorrelation(*(float(doc[k]) for k in triple)))


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build and validate a config from a parsed JSON document; unknown keys are errors."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    _reject_unknown(doc, _TOP_KEYS, "")
    for key in ("network", "aging", "schemes", "drops", "realizations_per_drop", "master_seed"):
        if key not in doc:
            raise ConfigError(f"{key}: missing required key")
    net_doc = doc["network"]
    if not isinstance(net_doc, dict):
        raise ConfigError("network: must be an object")
    _reject_unknown(net_doc, _NETWORK_KEYS, "network.")
    try:
        network = NetworkConfig(**net_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"network: {exc}") from exc
    schemes = doc["schemes"]
    if not isinstance(schemes, list):
        raise ConfigError("schemes: must be a list")
    return ExperimentConfig(
        network=network,
        aging=_parse_aging(doc["aging"]),
        schemes=tuple(schemes),
        drops=int(doc["drops"]),
        realizations_per_drop=int(doc["realizations_per_drop"]),
        master_seed=int(doc["master_seed"]),
        pi_samples=int(doc.get("pi_samples", 200)),
        output_path=doc.get("output_path"),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(doc)


@dataclass
class DropOutput:
    drop_id: int
    rates: dict            # scheme -> (K,) rates
    mse_sums: dict         # scheme -> (sum, count)
    skipped: int


def _run_drop(config: ExperimentConfig, drop_id: int) -> DropOutput:
    """All Monte-Carlo work for one drop; a pure function of (config, drop_id)."""
    net = config.network
    seed = config.master_seed
    scen = build_scenario(net, derive_stream(seed, drop_id, 0, 0, "scenario"))
    aging = config.aging

    local_c = None
    if "local_tmmse" in config.schemes:
        rngs = [derive_stream(seed, drop_id, 0, l, "local_pi") for l in range(net.L)]
        local_c = local_stage_matrices(scen, config.pi_samples, rngs)

    accs = {s: MomentAccumulator(net.K, scen.p, scen.sigma) for s in config.schemes}
    skipped = 0
    for i in range(config.realizations_per_drop):
        pair = sample_pair(scen, aging, derive_stream(seed, drop_id, i, 0, "channel"))
        psets = {}
        try:
            for s in config.schemes:
                if s == "team_mmse":
                    rngs = [derive_stream(seed, drop_id, i, l, "team_pi")
                            for l in range(net.L)]
                    psets[s] = team_mmse_precoder(pair, scen, aging, config.pi_samples, rngs)
                else:
                    psets[s] = build_precoder(s, pair, scen, aging, config.pi_samples,
                                              local_stages=local_c)
        except SingularStage:
            skipped += 1
            continue
        for s, pset in psets.items():
            accs[s].update(pair, pset)

    used = config.realizations_per_drop - skipped
    if used < 2:
        raise RuntimeError(
            f"drop {drop_id}: {skipped}/{config.realizations_per_drop} realizations "
            "hit singular stages; too few samples remain")

    rates = {s: sinr_and_rate(acc.moments(), scen.p) for s, acc in accs.items()}
    mse_sums = {s: (acc.sum_mse, acc.n) for s, acc in accs.items()}
    return DropOutput(drop_id=drop_id, rates=rates, mse_sums=mse_sums, skipped=skipped)


def _run_drop_star(args) -> DropOutput:
    return _run_drop(*args)


def _resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    return max(1, int(env)) if env else 1


@dataclass
class ExperimentResult:
    records: list
    summary: dict
    csv_path: Path | None = None
    summary_path: Path | None = None


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Run all drops, pool the rate records, and write the CSV/summary artifacts.

    Output is a pure function of (config, master_seed): drops are independent
    tasks with hash-derived streams and are merged in drop order, so the byte
    content does not depend on the worker count (set via CFSIM_WORKERS).
    """
    workers = _resolve_workers(workers)
    tasks = [(config, d) for d in range(config.drops)]
    if workers <= 1 or config.drops == 1:
        outputs = [_run_drop(*t) for t in tasks]
    else:
        methods = mp.get_all_start_methods()
        ctx = mp.get_context("fork" if "fork" in methods else "spawn")
        with ProcessPoolExecutor(max_workers=min(workers, config.drops),
                                 mp_context=ctx) as pool:
            outputs = list(pool.map(_run_drop_star, tasks))
    outputs.sort(key=lambda o: o.drop_id)

    total = config.drops * config.realizations_per_drop
    skipped = sum(o.skipped for o in outputs)
    if skipped > 0.01 * total:
        raise RuntimeError(
            f"{skipped}/{total} realizations failed with singular stages; aborting")

    records = []
    for out in outputs:
        for scheme in config.schemes:
            for k, rate in enumerate(out.rates[scheme]):
                records.append(RateRecord(drop_id=out.drop_id, ue_id=k,
                                          scheme=scheme, rate_bits=float(rate)))

    summary = {
        "drops": config.drops,
        "realizations_per_drop": config.realizations_per_drop,
        "master_seed": config.master_seed,
        "pi_samples": config.pi_samples,
        "skipped_realizations": skipped,
        "total_realizations": total,
        "schemes": {},
    }
    for scheme in config.schemes:
        rates = np.array([r.rate_bits for r in records if r.scheme == scheme])
        pct = np.percentile(rates, [10, 25, 50, 75, 90])
        mse_total = sum(out.mse_sums[scheme][0] for out in outputs)
        mse_count = sum(out.mse_sums[scheme][1] for out in outputs)
        summary["schemes"][scheme] = {
            "count": int(rates.size),
            "percentiles": {f"p{q}": float(v) for q, v in zip((10, 25, 50, 75, 90), pct)},
            "mse_objective": mse_total / mse_count,
        }

    result = ExperimentResult(records=records, summary=summary)
    if config.output_path:
        result.csv_path = Path(config.output_path)
        write_rates_csv(records, result.csv_path)
        result.summary_path = summary_json_path(result.csv_path)
        with open(result.summary_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return result


def summary_json_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + "_summary.json")


def write_rates_csv(records, path) -> None:
    """Rate records as UTF-8, LF-terminated CSV with 10 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in records:
            fh.write(f"{rec.drop_id},{rec.ue_id},{rec.scheme},{rec.rate_bits:.10g}\n")


def read_rates_csv(path) -> list:
    """Parse a rates CSV back into records, reporting the offending row on errors."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                records.append(RateRecord(drop_id=int(parts[0]), ue_id=int(parts[1]),
                                          scheme=parts[2], rate_bits=float(parts[3])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return records


def write_cdf_csvs(rates_csv_path, out_dir=None) -> dict[str, Path]:
    """One CDF CSV per scheme next to the rates file (or under out_dir)."""
    rates_csv_path = Path(rates_csv_path)
    records = read_rates_csv(rates_csv_path)
    if not records:
        raise ValueError(f"{rates_csv_path}: no rate records")
    curves = aggregate_cdf(records)
    target = Path(out_dir) if out_dir is not None else rates_csv_path.parent
    target.mkdir(parents=True, exist_ok=True)
    written = {}
    for scheme, points in curves.items():
        path = target / f"{rates_csv_path.stem}_cdf_{scheme}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("rate_bits_per_hz,cdf\n")
            for rate, cdf in points:
                fh.write(f"{rate:.10g},{cdf:.10g}\n")
        written[scheme] = path
    return written
