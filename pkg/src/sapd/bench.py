"""Monte-Carlo benchmark harness.

Reproduces the desk-scale experiment set: RMSE-vs-SNR sweeps (on- and
off-grid), resolution-vs-separation curves, sequential throughput over
a detection-cell workload, the five-source patch stress scene, and a
source-count scaling sweep. Results are emitted as CSV rows plus a
JSON summary; presets embed acceptance thresholds so a bench run can
gate CI.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .array_model import ArrayConfig, Scene, draw_scene, synthesize_snapshot
from .backend import thread_limit
from .baselines import dml_exhaustive, omp
from .solver import DoaEstimate, SolverParams, estimate

CSV_COLUMNS = [
    "scenario", "estimator", "sweep_name", "sweep_value", "trials",
    "rmse_deg", "success_rate", "card_fail_rate", "mean_latency_s",
    "median_latency_s", "p99_latency_s", "mean_patch_rounds", "completion_rate",
]

# per-op seconds for the calibration matmul on a nominal desktop-class
# core; latency thresholds scale by (measured / reference) when the
# executing machine is slower
CALIBRATION_REFERENCE_S = 8.0e-6


@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark experiment: scenario, sweep, and trial budget."""

    scenario: str
    sweep_name: str
    sweep_values: tuple
    trials: int = 1000
    base_seed: int = 12345
    estimators: tuple = ("sapd",)
    snr_db: float = 15.0
    angles: tuple = (0.0, 8.0)
    offgrid: bool = False
    amp_mean: float = 30.0
    params: SolverParams = field(default_factory=SolverParams)
    budget_ms: float = 50.0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.sweep_values:
            raise ValueError("sweep range must be nonempty")


@dataclass(frozen=True)
class ResultRow:
    """Aggregated outcome of one (sweep value, estimator) cell."""

    scenario: str
    estimator: str
    sweep_name: str
    sweep_value: float
    trials: int
    rmse_deg: float
    success_rate: float
    card_fail_rate: float
    mean_latency_s: float
    median_latency_s: float
    p99_latency_s: float
    mean_patch_rounds: float
    completion_rate: float = 1.0

    def as_list(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def matched_sq_error(est_angles, true_angles) -> float:
    """Sum of squared angle errors under minimum-cost assignment.

    Invariant to the ordering of the estimate; defined only when the
    cardinalities agree.
    """
    est = np.asarray(est_angles, dtype=float)
    tru = np.asarray(true_angles, dtype=float)
    if len(est) != len(tru):
        raise ValueError("cardinality mismatch")
    cost = (est[:, None] - tru[None, :]) ** 2
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum())


def _run_estimator(name: str, cfg: ArrayConfig, y: np.ndarray, k_true: int,
                   params: SolverParams):
    """Run one estimator; returns (angles, latency seconds, patch rounds)."""
    if name == "sapd":
        t0 = time.perf_counter()
        est = estimate(cfg, y, params)
        return est.angles, time.perf_counter() - t0, est.patch_rounds
    if name == "omp":
        t0 = time.perf_counter()
        res = omp(cfg, y, k_max=k_true)
        return res.angles, time.perf_counter() - t0, 0
    if name == "dml":
        t0 = time.perf_counter()
        res = dml_exhaustive(cfg, y, k=k_true)
        return res.angles, time.perf_counter() - t0, 0
    raise ValueError(f"unknown estimator {name!r}")


def _trial(args):
    """One Monte-Carlo trial; module-level so process pools can run it."""
    cfg, spec, angles, seed, estimators = args
    rng = np.random.default_rng(seed)
    if spec.offgrid:
        bias = rng.uniform(-cfg.grid_step / 2.0, cfg.grid_step / 2.0)
        angles = tuple(a + bias for a in angles)
    scene = draw_scene(angles, spec.snr_db, rng, amp_mean=spec.amp_mean)
    snap = synthesize_snapshot(cfg, scene, rng)
    out = {}
    for name in estimators:
        est_angles, lat, rounds = _run_estimator(name, cfg, snap.data, len(angles), spec.params)
        card_ok = len(est_angles) == len(angles)
        sq = matched_sq_error(est_angles, angles) if card_ok else float("nan")
        out[name] = (card_ok, sq, lat, rounds)
    return angles, out


def _map_trials(cfg: ArrayConfig, spec: ExperimentSpec, angles, estimators):
    """Ordered trial results; parallel across trials when allowed."""
    jobs = [(cfg, spec, tuple(angles), spec.base_seed + i, tuple(estimators))
            for i in range(spec.trials)]
    workers = thread_limit()
    if workers > 1 and spec.trials > 8:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_trial, jobs, chunksize=max(1, spec.trials // (8 * workers))))
    return [_trial(j) for j in jobs]


def _aggregate(scenario, estimator, sweep_name, sweep_value, results, k: int) -> ResultRow:
    cards, sqs, lats, rounds = [], [], [], []
    for _tru, out in results:
        card_ok, sq, lat, r = out[estimator]
        cards.append(card_ok)
        if card_ok:
            sqs.append(sq)
        lats.append(lat)
        rounds.append(r)
    n = len(results)
    n_ok = int(np.sum(cards))
    rmse = float(np.sqrt(np.sum(sqs) / (n_ok * k))) if n_ok else float("nan")
    succ = 0
    for _tru, out in results:
        card_ok, sq, _, _ = out[estimator]
        if card_ok and np.sqrt(sq / k) < 0.5:
            succ += 1
    lats = np.asarray(lats)
    return ResultRow(
        scenario=scenario,
        estimator=estimator,
        sweep_name=sweep_name,
        sweep_value=float(sweep_value),
        trials=n,
        rmse_deg=rmse,
        success_rate=succ / n,
        card_fail_rate=1.0 - n_ok / n,
        mean_latency_s=float(lats.mean()),
        median_latency_s=float(np.median(lats)),
        p99_latency_s=float(np.percentile(lats, 99)),
        mean_patch_rounds=float(np.mean(rounds)),
    )


def run_rmse_sweep(cfg: ArrayConfig, spec: ExperimentSpec) -> list:
    """RMSE versus SNR for a fixed two-source geometry."""
    rows = []
    for snr in spec.sweep_values:
        sub = replace(spec, snr_db=float(snr))
        results = _map_trials(cfg, sub, spec.angles, spec.estimators)
        for est in spec.estimators:
            rows.append(_aggregate(spec.scenario, est, spec.sweep_name, snr,
                                   results, len(spec.angles)))
    return rows


def run_resolution_sweep(cfg: ArrayConfig, spec: ExperimentSpec) -> list:
    """Success rate versus angular separation of an on-grid pair.

    Success demands the correct cardinality and a per-trial RMSE below
    half a degree.
    """
    rows = []
    for sep in spec.sweep_values:
        angles = (0.0, float(sep))
        results = _map_trials(cfg, spec, angles, spec.estimators)
        for est in spec.estimators:
            rows.append(_aggregate(spec.scenario, est, spec.sweep_name, sep, results, 2))
    return rows


def run_throughput(cfg: ArrayConfig, spec: ExperimentSpec) -> list:
    """Sequential per-cell workload latency versus cell count.

    Each sweep value is a number of detection cells processed strictly
    sequentially; the completion rate counts cells whose cumulative
    finish time stays within the configured budget.
    """
    rows = []
    # one untimed call so module-level caches do not bill the first cell
    warm_rng = np.random.default_rng(spec.base_seed)
    warm = synthesize_snapshot(cfg, draw_scene(spec.angles, spec.snr_db, warm_rng,
                                               amp_mean=spec.amp_mean), warm_rng)
    estimate(cfg, warm.data, spec.params)
    for n_cells in spec.sweep_values:
        n_cells = int(n_cells)
        rng = np.random.default_rng(spec.base_seed + n_cells)
        snaps = []
        for _ in range(n_cells):
            scene = draw_scene(spec.angles, spec.snr_db, rng, amp_mean=spec.amp_mean)
            snaps.append(synthesize_snapshot(cfg, scene, rng))
        lats, cards, rounds = [], [], []
        for snap in snaps:
            t0 = time.perf_counter()
            est = estimate(cfg, snap.data, spec.params)
            lats.append(time.perf_counter() - t0)
            cards.append(len(est.angles) == len(spec.angles))
            rounds.append(est.patch_rounds)
        lats = np.asarray(lats) if lats else np.zeros(1)
        finish = np.cumsum(lats)
        cr = float(np.mean(finish <= spec.budget_ms / 1e3)) if n_cells else 1.0
        rows.append(ResultRow(
            scenario=spec.scenario, estimator="sapd", sweep_name=spec.sweep_name,
            sweep_value=float(n_cells), trials=n_cells,
            rmse_deg=float("nan"),
            success_rate=float(np.mean(cards)) if cards else 1.0,
            card_fail_rate=1.0 - (float(np.mean(cards)) if cards else 1.0),
            mean_latency_s=float(lats.mean()),
            median_latency_s=float(np.median(lats)),
            p99_latency_s=float(np.percentile(lats, 99)),
            mean_patch_rounds=float(np.mean(rounds)) if rounds else 0.0,
            completion_rate=cr,
        ))
    return rows


def run_patch_scenario(cfg: ArrayConfig, spec: ExperimentSpec) -> list:
    """Fixed five-source stress scene exercising support augmentation."""
    results = _map_trials(cfg, spec, spec.angles, ("sapd",))
    return [_aggregate(spec.scenario, "sapd", spec.sweep_name, spec.snr_db,
                       results, len(spec.angles))]


def run_source_count_sweep(cfg: ArrayConfig, spec: ExperimentSpec) -> list:
    """Latency and accuracy versus source count on well-separated scenes."""
    rows = []
    for k in spec.sweep_values:
        k = int(k)
        per_trial = []
        for i in range(spec.trials):
            rng = np.random.default_rng(spec.base_seed + 1000 * k + i)
            angles = _separated_angles(cfg, k, rng, min_sep=15.0)
            scene = draw_scene(angles, spec.snr_db, rng, amp_mean=spec.amp_mean)
            snap = synthesize_snapshot(cfg, scene, rng)
            est_angles, lat, rounds = _run_estimator("sapd", cfg, snap.data, k, spec.params)
            card_ok = len(est_angles) == k
            sq = matched_sq_error(est_angles, angles) if card_ok else float("nan")
            per_trial.append((angles, {"sapd": (card_ok, sq, lat, rounds)}))
        rows.append(_aggregate(spec.scenario, "sapd", spec.sweep_name, k, per_trial, k))
    return rows


def _separated_angles(cfg: ArrayConfig, k: int, rng, min_sep: float) -> tuple:
    """Random scene with a guaranteed pairwise separation."""
    lo, hi = cfg.grid_min + 5.0, cfg.grid_max - 5.0
    for _ in range(1000):
        cand = np.sort(rng.uniform(lo, hi, k))
        if k == 1 or np.min(np.diff(cand)) >= min_sep:
            return tuple(np.round(cand).astype(float))
    # fall back to an even spread when rejection sampling stalls
    return tuple(np.round(np.linspace(lo, hi, k)).astype(float))


def calibration_scale() -> float:
    """Latency scale factor of this machine versus the reference core.

    Times a fixed small-matrix workload; values above 1 loosen the
    latency acceptance thresholds proportionally.
    """
    rng = np.random.default_rng(0)
    a = rng.standard_normal((64, 64))
    b = rng.standard_normal((64, 64))
    a @ b  # warm up
    reps = 200
    t0 = time.perf_counter()
    for _ in range(reps):
        a @ b
    per_op = (time.perf_counter() - t0) / reps
    return max(per_op / CALIBRATION_REFERENCE_S, 1.0)


EX5_ANGLES = (-30.0, -20.0, -10.0, 37.0, 45.0)


def make_preset(name: str, trials: int | None = None, base_seed: int = 12345,
                params: SolverParams | None = None) -> ExperimentSpec:
    """Named experiment presets mirroring the benchmark scenarios."""
    p = params if params is not None else SolverParams()
    if name == "example1":
        return ExperimentSpec(scenario="example1", sweep_name="cells",
                              sweep_values=(1, 5, 10, 20, 30, 40, 50),
                              trials=trials or 1, base_seed=base_seed, params=p)
    if name == "example2_ongrid":
        return ExperimentSpec(scenario="example2_ongrid", sweep_name="snr_db",
                              sweep_values=(-5, 0, 5, 10, 15, 20, 25),
                              trials=trials or 1000, base_seed=base_seed,
                              estimators=("sapd", "omp"), params=p)
    if name == "example2_offgrid":
        return ExperimentSpec(scenario="example2_offgrid", sweep_name="snr_db",
                              sweep_values=(-5, 0, 5, 10, 15, 20, 25),
                              trials=trials or 1000, base_seed=base_seed,
                              offgrid=True, params=p)
    if name == "example3_resolution":
        return ExperimentSpec(scenario="example3_resolution", sweep_name="separation_deg",
                              sweep_values=(2, 4, 6, 8, 10, 12, 14, 16),
                              trials=trials or 1000, base_seed=base_seed, params=p)
    if name == "example4_sources":
        return ExperimentSpec(scenario="example4_sources", sweep_name="num_sources",
                              sweep_values=(2, 3, 4, 5, 6, 7),
                              trials=trials or 100, base_seed=base_seed, params=p)
    if name == "example5_patch":
        return ExperimentSpec(scenario="example5_patch", sweep_name="snr_db",
                              sweep_values=(15.0,), angles=EX5_ANGLES,
                              trials=trials or 1000, base_seed=base_seed, params=p)
    raise KeyError(f"unknown preset {name!r}")


PRESET_NAMES = ("example1", "example2_ongrid", "example2_offgrid",
                "example3_resolution", "example4_sources", "example5_patch")


def run_preset(cfg: ArrayConfig, spec: ExperimentSpec) -> list:
    runner = {
        "example1": run_throughput,
        "example2_ongrid": run_rmse_sweep,
        "example2_offgrid": run_rmse_sweep,
        "example3_resolution": run_resolution_sweep,
        "example4_sources": run_source_count_sweep,
        "example5_patch": run_patch_scenario,
    }[spec.scenario]
    return runner(cfg, spec)


def check_acceptance(spec: ExperimentSpec, rows: list) -> list:
    """Threshold checks embedded in each preset; returns failure messages."""
    failures = []

    def row(estimator, value):
        for r in rows:
            if r.estimator == estimator and r.sweep_value == value:
                return r
        return None

    scale = calibration_scale()
    if spec.scenario == "example2_ongrid":
        r = row("sapd", 15.0)
        if r and not (0.13 <= r.rmse_deg <= 0.30):
            failures.append(f"sapd on-grid RMSE at 15 dB = {r.rmse_deg:.4f}, outside [0.13, 0.30]")
        ro = row("omp", 15.0)
        if ro and not (np.isnan(ro.rmse_deg) or ro.rmse_deg > 3.0):
            failures.append(f"omp RMSE at 15 dB = {ro.rmse_deg:.4f}, expected > 3")
    elif spec.scenario == "example2_offgrid":
        r = row("sapd", 15.0)
        if r and not r.rmse_deg <= 0.35:
            failures.append(f"sapd off-grid RMSE at 15 dB = {r.rmse_deg:.4f}, expected <= 0.35")
    elif spec.scenario == "example3_resolution":
        r6, r2 = row("sapd", 6.0), row("sapd", 2.0)
        if r6 and r6.success_rate < 0.95:
            failures.append(f"resolution success at 6 deg = {r6.success_rate:.3f}, expected >= 0.95")
        if r2 and r2.success_rate < 0.60:
            failures.append(f"resolution success at 2 deg = {r2.success_rate:.3f}, expected >= 0.60")
    elif spec.scenario == "example5_patch":
        r = rows[0] if rows else None
        if r:
            if 1.0 - r.card_fail_rate < 0.90:
                failures.append(f"patch cardinality rate = {1 - r.card_fail_rate:.3f}, expected >= 0.90")
            if not r.rmse_deg <= 0.5:
                failures.append(f"patch RMSE = {r.rmse_deg:.4f}, expected <= 0.5")
            if r.mean_patch_rounds < 1.0:
                failures.append(f"mean patch rounds = {r.mean_patch_rounds:.2f}, expected >= 1")
    elif spec.scenario == "example1":
        # the largest batch gives the statistically meaningful median
        r = row("sapd", 50.0)
        if r and r.median_latency_s >= 1e-3 * scale:
            failures.append(f"per-cell median latency = {r.median_latency_s * 1e3:.3f} ms, "
                            f"expected < {scale:.2f} ms")
        r50 = row("sapd", 50.0)
        if r50 and r50.mean_latency_s * 50 >= 75e-3 * scale:
            failures.append(f"50-cell batch = {r50.mean_latency_s * 50 * 1e3:.1f} ms, "
                            f"expected < {75 * scale:.0f} ms")
    return failures


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.as_list())
    return buf.getvalue()


def rows_to_summary(spec: ExperimentSpec, rows: list, failures: list) -> dict:
    return {
        "scenario": spec.scenario,
        "trials": spec.trials,
        "base_seed": spec.base_seed,
        "rows": [dict(zip(CSV_COLUMNS, r.as_list())) for r in rows],
        "acceptance_failures": failures,
        "passed": not failures,
    }
