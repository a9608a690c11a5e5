import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import cfsim.harness as harness
from cfsim.channel import AgingModel
from cfsim.harness import (
    ConfigError,
    ExperimentConfig,
    SeedPath,
    config_from_dict,
    derive_stream,
    load_config,
    run_experiment,
    write_cdf_csvs,
    write_rates_csv,
)
from cfsim.precoding import SingularStage
from cfsim.scenario import NetworkConfig

REPO = Path(__file__).resolve().parents[1]


def small_config(tmp_path, **overrides):
    doc = {
        "network": {"L": 4, "N": 1, "K": 3, "area_side": 400.0},
        "aging": {"r": 0.9},
        "schemes": ["team_mmse", "local_tmmse", "centralized"],
        "drops": 4,
        "realizations_per_drop": 3,
        "pi_samples": 8,
        "master_seed": 99,
        "output_path": str(tmp_path / "rates.csv"),
    }
    doc.update(overrides)
    return config_from_dict(doc)


# ---------------------------------------------------------------- seeding

def test_derive_stream_is_reproducible():
    a = derive_stream(5, 1, 2, 3, "channel").standard_normal(1000)
    b = derive_stream(SeedPath(5, 1, 2, 3, "channel")).standard_normal(1000)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("other", [
    SeedPath(6, 1, 2, 3, "channel"),
    SeedPath(5, 2, 2, 3, "channel"),
    SeedPath(5, 1, 3, 3, "channel"),
    SeedPath(5, 1, 2, 4, "channel"),
    SeedPath(5, 1, 2, 3, "team_pi"),
])
def test_derive_stream_independence_smoke(other):
    base = derive_stream(SeedPath(5, 1, 2, 3, "channel")).standard_normal(1000)
    draws = derive_stream(other).standard_normal(1000)
    assert not np.array_equal(base, draws)
    corr = np.corrcoef(base, draws)[0, 1]
    assert abs(corr) < 0.1


# ---------------------------------------------------------------- config

def test_config_roundtrip(tmp_path):
    cfg = small_config(tmp_path)
    assert cfg.network.L == 4
    assert cfg.schemes == ("team_mmse", "local_tmmse", "centralized")
    assert float(np.asarray(cfg.aging.r)) == 0.9


def test_config_unknown_keys_name_the_path(tmp_path):
    with pytest.raises(ConfigError, match=r"network\.LL"):
        config_from_dict({"network": {"L": 1, "N": 1, "K": 1, "LL": 2},
                          "aging": {"r": 1.0}, "schemes": ["naive"], "drops": 1,
                          "realizations_per_drop": 2, "master_seed": 0})
    with pytest.raises(ConfigError, match="bogus"):
        config_from_dict({"bogus": 1, "network": {"L": 1, "N": 1, "K": 1},
                          "aging": {"r": 1.0}, "schemes": ["naive"], "drops": 1,
                          "realizations_per_drop": 2, "master_seed": 0})


def test_config_validation_errors(tmp_path):
    base = {"network": {"L": 1, "N": 1, "K": 1}, "aging": {"r": 1.0},
            "schemes": ["naive"], "drops": 1, "realizations_per_drop": 2,
            "master_seed": 0}
    for key, value, pattern in [
        ("drops", 0, "drops"),
        ("realizations_per_drop", 1, "realizations_per_drop"),
        ("schemes", [], "schemes"),
        ("schemes", ["nonsense"], "unknown scheme"),
        ("schemes", ["naive", "naive"], "duplicate"),
        ("aging", {"r": 1.5}, r"aging\.r"),
        ("aging", {"doppler_hz": 1.0}, "aging"),
    ]:
        doc = dict(base)
        doc[key] = value
        with pytest.raises(ConfigError, match=pattern):
            config_from_dict(doc)
    missing = {k: v for k, v in base.items() if k != "aging"}
    with pytest.raises(ConfigError, match="aging"):
        config_from_dict(missing)


def test_config_clarke_aging():
    doc = {"network": {"L": 1, "N": 1, "K": 1},
           "aging": {"doppler_hz": 10.0, "symbol_time_s": 1e-3, "delay_symbols": 10},
           "schemes": ["naive"], "drops": 1, "realizations_per_drop": 2,
           "master_seed": 0}
    cfg = config_from_dict(doc)
    assert float(np.asarray(cfg.aging.r)) == pytest.approx(0.90368, abs=1e-4)


def test_load_config_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(path)


# ---------------------------------------------------------------- experiment

def test_minimal_run_single_record(tmp_path):
    cfg = config_from_dict({
        "network": {"L": 1, "N": 1, "K": 1},
        "aging": {"r": 0.9},
        "schemes": ["local_tmmse"],
        "drops": 1, "realizations_per_drop": 2, "pi_samples": 4,
        "master_seed": 3, "output_path": str(tmp_path / "one.csv")})
    first = run_experiment(cfg)
    assert len(first.records) == 1
    again = run_experiment(cfg)
    assert first.records == again.records


def test_records_cover_drops_ues_schemes(tmp_path):
    cfg = small_config(tmp_path)
    res = run_experiment(cfg)
    assert len(res.records) == cfg.drops * cfg.network.K * len(cfg.schemes)
    for scheme, stats in res.summary["schemes"].items():
        assert stats["count"] == cfg.drops * cfg.network.K
        assert set(stats["percentiles"]) == {"p10", "p25", "p50", "p75", "p90"}
        assert stats["mse_objective"] > 0


def test_worker_count_does_not_change_bytes(tmp_path):
    cfg_a = small_config(tmp_path, output_path=str(tmp_path / "a.csv"))
    cfg_b = small_config(tmp_path, output_path=str(tmp_path / "b.csv"))
    run_experiment(cfg_a, workers=1)
    run_experiment(cfg_b, workers=8)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_workers_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.WORKERS_ENV, "2")
    cfg = small_config(tmp_path, drops=2, output_path=str(tmp_path / "env.csv"))
    ref = small_config(tmp_path, drops=2, output_path=str(tmp_path / "ref.csv"))
    run_experiment(cfg)
    monkeypatch.delenv(harness.WORKERS_ENV)
    run_experiment(ref)
    assert (tmp_path / "env.csv").read_bytes() == (tmp_path / "ref.csv").read_bytes()


def test_csv_format(tmp_path):
    cfg = small_config(tmp_path, drops=1, schemes=["centralized"])
    res = run_experiment(cfg)
    raw = res.csv_path.read_bytes()
    assert b"\r" not in raw
    assert raw.endswith(b"\n")
    lines = raw.decode().splitlines()
    assert lines[0] == "drop_id,ue_id,scheme,rate_bits_per_hz"
    assert len(lines) == 1 + cfg.network.K
    summary = json.loads(res.summary_path.read_text())
    assert summary["skipped_realizations"] == 0


def test_common_random_numbers_across_schemes(tmp_path, monkeypatch):
    seen = []
    original = harness.build_precoder

    def spy(scheme, pair, *args, **kwargs):
        seen.append((scheme, hashlib.sha256(pair.h_now.tobytes()).hexdigest()))
        return original(scheme, pair, *args, **kwargs)

    monkeypatch.setattr(harness, "build_precoder", spy)
    cfg = small_config(tmp_path, schemes=["local_tmmse", "centralized", "naive"],
                       drops=1, realizations_per_drop=3)
    run_experiment(cfg, workers=1)
    per_realization = [seen[i:i + 3] for i in range(0, len(seen), 3)]
    assert len(per_realization) == 3
    for group in per_realization:
        assert len({digest for _, digest in group}) == 1
        assert sorted(s for s, _ in group) == ["centralized", "local_tmmse", "naive"]


def test_singular_stages_abort_when_frequent(tmp_path, monkeypatch):
    def explode(*args, **kwargs):
        raise SingularStage("synthetic failure")

    monkeypatch.setattr(harness, "build_precoder", explode)
    cfg = small_config(tmp_path, schemes=["centralized"], drops=1)
    with pytest.raises(RuntimeError, match="singular"):
        run_experiment(cfg, workers=1)


def test_cdf_csvs_sorted_and_monotone(tmp_path):
    cfg = small_config(tmp_path, drops=2, schemes=["centralized", "naive"])
    res = run_experiment(cfg)
    written = write_cdf_csvs(res.csv_path)
    assert set(written) == {"centralized", "naive"}
    for path in written.values():
        lines = path.read_text().splitlines()
        assert lines[0] == "rate_bits_per_hz,cdf"
        rows = [tuple(map(float, line.split(","))) for line in lines[1:]]
        assert rows == sorted(rows)
        assert all(0 < c <= 1 for _, c in rows)
        assert rows[-1][1] == pytest.approx(1.0)


def test_read_rates_csv_reports_row_numbers(tmp_path):
    path = tmp_path / "broken.csv"
    path.write_text("drop_id,ue_id,scheme,rate_bits_per_hz\n0,0,naive,1.0\n0,1,naive\n")
    with pytest.raises(ValueError, match=":3"):
        harness.read_rates_csv(path)


# ---------------------------------------------------------------- CLI

def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "cfsim", *args],
                          capture_output=True, text=True, cwd=cwd)


def test_cli_run_and_cdf(tmp_path):
    doc = json.loads((REPO / "configs" / "desk.json").read_text())
    doc["output_path"] = "desk_rates.csv"
    config_path = tmp_path / "desk.json"
    config_path.write_text(json.dumps(doc))
    proc = run_cli("run", str(config_path), cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "desk_rates.csv").exists()
    assert (tmp_path / "desk_rates_summary.json").exists()

    proc = run_cli("cdf", "desk_rates.csv", cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    for scheme in doc["schemes"]:
        assert (tmp_path / f"desk_rates_cdf_{scheme}.csv").exists()


def test_cli_scenario_dump(tmp_path):
    proc = run_cli("scenario", str(REPO / "configs" / "desk.json"), cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(proc.stdout)
    assert doc["sum_p"] == pytest.approx(5.0)
    assert len(doc["gains"]) == 4


def test_cli_error_paths(tmp_path):
    assert run_cli().returncode == 1
    assert run_cli("run", str(tmp_path / "missing.json")).returncode == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"network": {"L": 1, "N": 1, "K": 1, "oops": 1},
                               "aging": {"r": 1.0}, "schemes": ["naive"],
                               "drops": 1, "realizations_per_drop": 2,
                               "master_seed": 0, "output_path": "x.csv"}))
    proc = run_cli("run", str(bad))
    assert proc.returncode == 1
    assert "network.oops" in proc.stderr


def test_cli_verify_passes():
    proc = run_cli("verify")
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "FAIL" not in proc.stdout
