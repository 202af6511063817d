"""Tests for the benchmark harness and its CLI.

tests/data/demo_per_time.csv and demo_summary.csv were generated once from
demo_config() and frozen; the determinism tests compare bytes against them.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from possitrack.bench import (
    BASELINE,
    PER_TIME_HEADER,
    PROPOSED,
    SUMMARY_HEADER,
    BenchConfig,
    BenchResult,
    config_from_dict,
    config_to_dict,
    default_config,
    demo_config,
    emit_results,
    load_config,
    make_run,
    read_csv_rows,
    run_benchmark,
)
from possitrack.cli import main
from possitrack.scenario import ScenarioConfig

DATA = Path(__file__).parent / "data"


# -------------------------------------------------------------------- config


def test_default_config_covers_full_study():
    cfg = default_config()
    assert cfg.lambda_list == (1.0, 5.0, 10.0)
    assert len(cfg.threshold_sweep) == 8
    assert cfg.n_runs == 100


def test_config_round_trip():
    cfg = demo_config()
    out = config_from_dict(config_to_dict(cfg))
    assert out == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown configuration keys"):
        config_from_dict({"a_df": 0.2, "typo_key": 1})


def test_config_accepts_scenario_and_bench_keys_mixed():
    cfg = config_from_dict({"lambda_fp": 5.0, "n_runs": 2, "a_df": 0.3})
    assert cfg.scenario.lambda_fp == 5.0
    assert cfg.n_runs == 2
    assert cfg.a_df == 0.3


def test_load_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"n_runs": 3, "lambda_list": [2.0]}))
    cfg = load_config(path)
    assert cfg.n_runs == 3
    assert tuple(cfg.lambda_list) == (2.0,)


def test_parameter_objects_reflect_scalars():
    cfg = demo_config()
    p = cfg.proposed_params()
    assert p.missed_detection == cfg.a_df
    assert p.disappearance == cfg.a_omega
    assert p.remain_absent == cfg.a_alpha
    assert p.survival == cfg.a_pi
    b = cfg.baseline_params(5.0)
    assert b.p_detect == cfg.p_d
    assert b.clutter_rate == 5.0
    assert b.surveillance_volume == pytest.approx(20.0)


# ----------------------------------------------------------------- scenarios


def test_make_run_is_deterministic_and_paired():
    cfg = ScenarioConfig()
    t1, o1 = make_run(cfg, 5.0, base_seed=11, lambda_index=0, run=4)
    t2, o2 = make_run(cfg, 5.0, base_seed=11, lambda_index=0, run=4)
    assert o1.steps == o2.steps
    for a, b in zip(t1.states, t2.states):
        if a is None:
            assert b is None
        else:
            np.testing.assert_array_equal(a, b)
    # different run index gives different data
    _, o3 = make_run(cfg, 5.0, base_seed=11, lambda_index=0, run=5)
    assert o1.steps != o3.steps


# ----------------------------------------------------------------- benchmark


def test_demo_benchmark_matches_golden_files(tmp_path):
    res = run_benchmark(demo_config())
    per_time, summary = emit_results(res, tmp_path)
    assert per_time.read_bytes() == (DATA / "demo_per_time.csv").read_bytes()
    assert summary.read_bytes() == (DATA / "demo_summary.csv").read_bytes()


def test_benchmark_rerun_is_byte_identical(tmp_path):
    cfg = BenchConfig(
        lambda_list=(1.0,), threshold_sweep=(0.5,), n_runs=2, base_seed=3
    )
    p1, s1 = emit_results(run_benchmark(cfg), tmp_path / "a")
    p2, s2 = emit_results(run_benchmark(cfg), tmp_path / "b")
    assert p1.read_bytes() == p2.read_bytes()
    assert s1.read_bytes() == s2.read_bytes()


def test_benchmark_table_shapes():
    cfg = BenchConfig(lambda_list=(1.0,), threshold_sweep=(0.3, 0.6), n_runs=1)
    res = run_benchmark(cfg)
    n_t = cfg.scenario.t_end + 1
    # 2 filters x 1 rate x 2 thresholds
    assert len(res.summary) == 4
    assert len(res.per_time) == 4 * n_t
    for row in res.summary:
        assert len(row) == len(SUMMARY_HEADER)
        assert row[0] in (PROPOSED, BASELINE)
    for row in res.per_time:
        assert len(row) == len(PER_TIME_HEADER)


def test_benchmark_clean_regime_tracks_tightly():
    # perfect detection, no false positives, low confirmation threshold: the
    # time-averaged error over the presence window stays near the
    # estimation-noise level (well under half the saturation constant)
    cfg = BenchConfig(
        scenario=ScenarioConfig(p_detect=1.0),
        lambda_list=(0.0,),
        threshold_sweep=(0.1,),
        n_runs=20,
        base_seed=2,
    )
    res = run_benchmark(cfg)
    rows = {
        (r[0], r[3]): r[4] for r in res.per_time  # (filter, t) -> mean error
    }
    birth, death = cfg.scenario.t_birth, cfg.scenario.t_death
    for name in (PROPOSED, BASELINE):
        window = [rows[(name, t)] for t in range(birth, death + 1)]
        assert float(np.mean(window)) < 0.5, f"{name} failed to lock on clean data"


# ----------------------------------------------------------------------- csv


def test_emit_empty_result_writes_header_only(tmp_path):
    res = BenchResult(config=demo_config())
    per_time, summary = emit_results(res, tmp_path)
    assert per_time.read_bytes() == (",".join(PER_TIME_HEADER) + "\r\n").encode()
    assert summary.read_bytes() == (",".join(SUMMARY_HEADER) + "\r\n").encode()


def test_csv_row_round_trip(tmp_path):
    res = BenchResult(
        per_time=[(PROPOSED, 1.0, 0.1, 0, 0.1 + 0.2, 5, 7)],
        summary=[(PROPOSED, 1.0, 0.1, 1.0 / 3.0, 5, 7, 5.0)],
        config=demo_config(),
    )
    per_time, summary = emit_results(res, tmp_path)
    row = read_csv_rows(per_time)[0]
    assert row["filter"] == PROPOSED
    assert float(row["mean_error"]) == 0.1 + 0.2  # repr floats are exact
    srow = read_csv_rows(summary)[0]
    assert float(srow["avg_error"]) == 1.0 / 3.0


# ----------------------------------------------------------------------- cli


def test_cli_demo_writes_tables(tmp_path, capsys):
    assert main(["demo", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert (tmp_path / "per_time.csv").exists()
    assert (tmp_path / "summary.csv").exists()
    assert "summary.csv" in out
    assert "avg_error" in out or "proposed" in out


def test_cli_run_with_config_and_overrides(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps({"n_runs": 4, "lambda_list": [1.0, 5.0], "threshold_sweep": [0.5]})
    )
    code = main(
        [
            "run",
            "--config",
            str(cfg_path),
            "--lambda",
            "2.0",
            "--runs",
            "1",
            "--seed",
            "5",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert code == 0
    rows = read_csv_rows(tmp_path / "out" / "summary.csv")
    assert {r["lambda"] for r in rows} == {"2.0"}
    assert {r["n_runs"] for r in rows} == {"1"}
    assert {r["seed"] for r in rows} == {"5"}


def test_cli_missing_config_is_config_error(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1


def test_cli_invalid_config_is_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"definitely_not_a_key": 1}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
