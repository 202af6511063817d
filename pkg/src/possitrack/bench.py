"""Monte Carlo benchmark: possibility filter vs. probabilistic baseline.

For every false-positive rate and every run, one scenario realization is
drawn and the identical observation record is fed to both filters; the
confirmation-threshold sweep is applied to the recorded filter states, so
the comparison is paired across filters and thresholds.  The baseline is
given the true false-positive rate and region; the possibility filter runs
with the no-knowledge clutter model.

Results are written as two CSV tables: per-time mean errors and time-averaged
summaries.  All randomness derives from ``base_seed`` through per-run seed
sequences, so a rerun of the same configuration is byte-identical.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .ipda import IpdaParams, IpdaState, ipda_estimate, ipda_step
from .scenario import (
    GroundTruth,
    ObservationRecord,
    ScenarioConfig,
    error_at,
    generate_observations,
    observation_matrix,
    observation_noise,
    process_noise,
    simulate_truth,
    transition_matrix,
)
from .single_target import (
    ClutterModel,
    ExtendedPossibility,
    ObservationDrivenBirth,
    SingleTargetParams,
    estimate,
    step,
)

logger = logging.getLogger(__name__)

__all__ = [
    "BenchConfig",
    "BenchResult",
    "default_config",
    "demo_config",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "run_benchmark",
    "emit_results",
    "PER_TIME_HEADER",
    "SUMMARY_HEADER",
]

PER_TIME_HEADER = ("filter", "lambda", "threshold", "t", "mean_error", "n_runs", "seed")
SUMMARY_HEADER = ("filter", "lambda", "threshold", "avg_error", "n_runs", "seed", "c_err")

PROPOSED = "proposed"
BASELINE = "baseline"


@dataclass(frozen=True)
class BenchConfig:
    """Scenario plus both filters' parameters and the sweep grid.

    The filter parameters are kept as the scalars one would tabulate
    (model matrices are derived from the scenario); ``proposed_params`` and
    ``baseline_params`` build the actual parameter objects.
    """

    scenario: ScenarioConfig = ScenarioConfig()
    # possibility filter
    a_df: float = 0.2
    a_omega: float = 0.01
    a_alpha: float = 0.5
    a_pi: float = 1.0
    tau_p: float = 1e-4
    tau_m: float = 3.22
    birth_velocity_std: float = 1.0
    # probabilistic baseline
    p_d: float = 0.8
    p_s: float = 0.99
    p_b: float = 0.5
    tau_p_ipda: float = 1e-5
    tau_m_ipda: float = 3.22
    # sweep
    lambda_list: tuple = (1.0, 5.0, 10.0)
    threshold_sweep: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
    n_runs: int = 100
    base_seed: int = 20260816
    c_err: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "lambda_list", tuple(float(v) for v in self.lambda_list))
        object.__setattr__(self, "threshold_sweep", tuple(float(v) for v in self.threshold_sweep))
        if not self.lambda_list or any(v < 0 for v in self.lambda_list):
            raise ValueError("lambda_list must be non-empty with rates >= 0")
        if not self.threshold_sweep or any(not 0 <= v < 1 for v in self.threshold_sweep):
            raise ValueError("threshold_sweep values must be in [0, 1)")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be >= 0")
        if self.c_err <= 0:
            raise ValueError("c_err must be > 0")

    def proposed_params(self) -> SingleTargetParams:
        sc = self.scenario
        return SingleTargetParams(
            trans=transition_matrix(sc),
            trans_noise=process_noise(sc),
            obs=observation_matrix(),
            obs_noise=observation_noise(sc),
            survival=self.a_pi,
            disappearance=self.a_omega,
            remain_absent=self.a_alpha,
            missed_detection=self.a_df,
            birth=ObservationDrivenBirth(self.birth_velocity_std),
            clutter=ClutterModel.no_knowledge(),
            prune_threshold=self.tau_p,
            merge_threshold=self.tau_m,
        )

    def baseline_params(self, lambda_fp: float) -> IpdaParams:
        sc = self.scenario
        return IpdaParams(
            trans=transition_matrix(sc),
            trans_noise=process_noise(sc),
            obs=observation_matrix(),
            obs_noise=observation_noise(sc),
            p_detect=self.p_d,
            p_survive=self.p_s,
            p_birth=self.p_b,
            clutter_rate=lambda_fp,
            surveillance_volume=sc.fp_hi - sc.fp_lo,
            birth_velocity_std=self.birth_velocity_std,
            prune_threshold=self.tau_p_ipda,
            merge_threshold=self.tau_m_ipda,
        )


def default_config() -> BenchConfig:
    """Full desk-scale study: 100 paired runs at rates 1, 5 and 10."""
    return BenchConfig()


def demo_config() -> BenchConfig:
    """Small pinned configuration for a quick deterministic demonstration."""
    return BenchConfig(
        lambda_list=(1.0,),
        threshold_sweep=(0.2, 0.5, 0.8),
        n_runs=5,
        base_seed=7,
    )


_SCENARIO_KEYS = {f.name for f in fields(ScenarioConfig)}
_BENCH_KEYS = {f.name for f in fields(BenchConfig)} - {"scenario"}


def config_from_dict(data: dict) -> BenchConfig:
    """Build a configuration from a flat mapping; unknown keys are an error."""
    if not isinstance(data, dict):
        raise ValueError("configuration must be a JSON object")
    unknown = set(data) - _SCENARIO_KEYS - _BENCH_KEYS
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    sc_kwargs = {k: data[k] for k in data if k in _SCENARIO_KEYS}
    bench_kwargs = {k: data[k] for k in data if k in _BENCH_KEYS}
    return BenchConfig(scenario=ScenarioConfig(**sc_kwargs), **bench_kwargs)


def config_to_dict(cfg: BenchConfig) -> dict:
    out = {f.name: getattr(cfg.scenario, f.name) for f in fields(ScenarioConfig)}
    for f in fields(BenchConfig):
        if f.name == "scenario":
            continue
        v = getattr(cfg, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def load_config(path) -> BenchConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return config_from_dict(data)


@dataclass
class BenchResult:
    """Row-oriented result tables plus the configuration that produced them."""

    per_time: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    config: BenchConfig = None


def make_run(
    scenario: ScenarioConfig, lambda_fp: float, base_seed: int, lambda_index: int, run: int
) -> tuple[GroundTruth, ObservationRecord]:
    """Deterministic scenario realization for one (rate, run) cell."""
    sc = replace(scenario, lambda_fp=lambda_fp)
    rng_truth = np.random.default_rng(np.random.SeedSequence((base_seed, lambda_index, run, 0)))
    rng_obs = np.random.default_rng(np.random.SeedSequence((base_seed, lambda_index, run, 1)))
    truth = simulate_truth(sc, rng_truth)
    return truth, generate_observations(truth, sc, rng_obs)


def run_benchmark(cfg: BenchConfig, progress: Callable[[str], None] | None = None) -> BenchResult:
    """Run the paired Monte Carlo study and return the result tables.

    Each filter runs once per (rate, run); the threshold sweep is applied to
    the filter state after every step, so all thresholds see identical
    filtering behavior.
    """
    thresholds = cfg.threshold_sweep
    n_t = cfg.scenario.t_end + 1
    prop_params = cfg.proposed_params()
    result = BenchResult(config=cfg)
    for li, lam in enumerate(cfg.lambda_list):
        base_params = cfg.baseline_params(lam)
        err = {
            PROPOSED: np.zeros((len(thresholds), n_t)),
            BASELINE: np.zeros((len(thresholds), n_t)),
        }
        for run in range(cfg.n_runs):
            truth, obs = make_run(cfg.scenario, lam, cfg.base_seed, li, run)
            st = ExtendedPossibility.absent()
            ip = IpdaState.initial()
            for t in range(n_t):
                ys = obs.steps[t]
                st = step(st, prop_params, ys)
                ip = ipda_step(ip, base_params, ys)
                for ti, tau in enumerate(thresholds):
                    err[PROPOSED][ti, t] += error_at(t, estimate(st, tau), truth, cfg.c_err)
                    err[BASELINE][ti, t] += error_at(t, ipda_estimate(ip, tau), truth, cfg.c_err)
            if progress is not None:
                progress(f"lambda={lam:g} run={run + 1}/{cfg.n_runs}")
        for name in (PROPOSED, BASELINE):
            mean = err[name] / cfg.n_runs
            for ti, tau in enumerate(thresholds):
                for t in range(n_t):
                    result.per_time.append(
                        (name, lam, tau, t, float(mean[ti, t]), cfg.n_runs, cfg.base_seed)
                    )
                result.summary.append(
                    (name, lam, tau, float(mean[ti].mean()), cfg.n_runs, cfg.base_seed, cfg.c_err)
                )
        logger.info("finished rate lambda=%g", lam)
    return result


def emit_results(result: BenchResult, out_dir) -> tuple[Path, Path]:
    """Write per_time.csv and summary.csv; returns the two paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_time_path = out / "per_time.csv"
    summary_path = out / "summary.csv"
    _write_csv(per_time_path, PER_TIME_HEADER, result.per_time)
    _write_csv(summary_path, SUMMARY_HEADER, result.summary)
    return per_time_path, summary_path


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])


def _format(v):
    if isinstance(v, float):
        return repr(v)
    return v


def read_csv_rows(path) -> list[dict]:
    """Read one of the emitted tables back as a list of dicts (test support)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
