"""Monte Carlo runners behind the CLI subcommands.

Every trial draws its randomness from ``SeedSequence(master_seed,
spawn_key=(0, trial))``, so results do not depend on how trials are spread
over threads. The same trial index reuses its data and measurement-matrix
seeds at every grid point and for every variant (common random numbers).
"""

from __future__ import annotations

import math
import os
import statistics
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..array_model import SourceScenario, make_rng, steering_matrix, synthesize_snapshots
from ..compression import MeasurementMatrix, compress, draw_measurement_matrix
from ..deviation import DeviationReport, deviation_report, lemma2a_check, lemma2b_check
from ..errors import CsdoaError
from ..rootmusic import (
    CLASSIC,
    CS,
    DoaEstimate,
    build_polynomial,
    doa_from_covariance,
    estimate_doa,
    match_to_truth,
)
from ..spectral import (
    eigendecompose_hermitian,
    exact_covariance,
    noise_projector,
    sample_covariance,
    split_subspaces,
)
from .config import ExperimentConfig

__all__ = [
    "THREADS_ENV",
    "TrialOutcome",
    "SweepRow",
    "SweepResult",
    "Example1Result",
    "TimingReport",
    "LemmaResult",
    "thread_count",
    "trial_seeds",
    "run_trial",
    "run_sweep",
    "run_example1",
    "run_rmse_sweep",
    "run_deviation_sweep",
    "run_timing",
    "run_lemma_check",
    "lemma_scaling",
    "random_lemma_instance",
]

THREADS_ENV = "CSDOA_THREADS"


def thread_count(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, else ``$CSDOA_THREADS``, else CPU count."""
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=key)


def trial_seeds(master_seed: int, trial: int) -> Tuple[int, int]:
    """``(phi_seed, data_seed)`` of one trial."""
    a, b = _seed_sequence(master_seed, 0, trial).generate_state(2, np.uint64)
    return int(a), int(b)


def fixed_phi_seed(master_seed: int) -> int:
    return int(_seed_sequence(master_seed, 1).generate_state(1, np.uint64)[0])


def _map(fn, items, threads: Optional[int]):
    n = thread_count(threads)
    if n == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass
class TrialOutcome:
    variant: str
    errors: Optional[np.ndarray] = None
    estimate: Optional[DoaEstimate] = None
    deviation: Optional[DeviationReport] = None
    failure: Optional[str] = None


def _phi_for(config: ExperimentConfig, trial: int) -> MeasurementMatrix:
    N, M = config.geometry.num_sensors, config.num_sources
    seed = fixed_phi_seed(config.master_seed) if config.fix_phi else trial_seeds(
        config.master_seed, trial
    )[0]
    return draw_measurement_matrix(config.m, N, config.phi_mode, seed, M=M)


def run_trial(
    config: ExperimentConfig, scenario: SourceScenario, trial: int,
    snr_db: Optional[float] = None,
) -> Dict[str, TrialOutcome]:
    """Estimate and deviation for every configured variant on one data draw."""
    snr_db = scenario.snr_db if snr_db is None else snr_db
    geometry = config.geometry
    M = scenario.num_sources
    snapshots = synthesize_snapshots(scenario, geometry, trial_seeds(config.master_seed, trial)[1])
    A = steering_matrix(geometry, scenario.angles_deg)
    R_x = exact_covariance(A, scenario.powers, scenario.noise_variance).data
    phi = _phi_for(config, trial) if CS in config.variants else None
    out = {}
    for variant in config.variants:
        if variant == CS:
            R_true = phi.data @ R_x @ phi.data.T
            R_hat = sample_covariance(compress(phi, snapshots)).data
        else:
            R_true = R_x
            R_hat = sample_covariance(snapshots).data
        outcome = TrialOutcome(variant)
        try:
            outcome.estimate = doa_from_covariance(R_hat, M, variant, geometry, phi)
            outcome.errors = match_to_truth(outcome.estimate.angles_deg, scenario.angles_deg)
        except CsdoaError as exc:
            outcome.failure = f"{exc.stage or 'pipeline'}: {exc}"
        if scenario.noise_variance > 0:
            try:
                outcome.deviation = deviation_report(
                    R_true, R_hat, scenario.noise_variance, M,
                    scenario.num_snapshots, snr_db, config.sigma_mode,
                )
            except CsdoaError:
                # undefined for raw-gaussian Phi, whose compressed noise is not white
                pass
        out[variant] = outcome
    return out


@dataclass(frozen=True)
class SweepRow:
    variant: str
    snr_db: float
    snapshots: int
    trials: int
    failures: int
    exceptions: int
    rmse_deg: float
    rmse_per_source: Tuple[float, ...]
    mean_xi_empirical: float
    mean_xi_quadratic: float
    xi_expected: float
    elapsed_seconds: float = field(default=0.0, compare=False)

    @property
    def rmse_max_source_deg(self) -> float:
        return max(self.rmse_per_source) if self.rmse_per_source else math.nan


SWEEP_COLUMNS = (
    "variant", "snr_db", "snapshots", "trials", "failures", "exceptions",
    "rmse_deg", "rmse_max_source_deg", "mean_xi_empirical", "mean_xi_quadratic",
    "xi_expected",
)


@dataclass
class SweepResult:
    rows: List[SweepRow]

    def row(self, variant: str, snr_db: float, snapshots: int) -> SweepRow:
        for r in self.rows:
            if r.variant == variant and r.snr_db == snr_db and r.snapshots == snapshots:
                return r
        raise KeyError((variant, snr_db, snapshots))

    def csv_rows(self):
        ordered = sorted(self.rows, key=lambda r: (r.variant, r.snapshots, r.snr_db))
        return [
            (r.variant, r.snr_db, r.snapshots, r.trials, r.failures, r.exceptions,
             r.rmse_deg, r.rmse_max_source_deg, r.mean_xi_empirical,
             r.mean_xi_quadratic, r.xi_expected)
            for r in ordered
        ]

    def elapsed(self) -> Dict[str, float]:
        return {f"{r.variant}/snr={r.snr_db:g}/T={r.snapshots}": r.elapsed_seconds
                for r in self.rows}


def _nanmean(values) -> float:
    arr = np.asarray([v for v in values if v is not None and math.isfinite(v)], dtype=float)
    return float(arr.mean()) if arr.size else math.nan


def _aggregate(
    variant: str, scenario: SourceScenario, snr_db: float,
    outcomes: Sequence[TrialOutcome], threshold: float, elapsed: float,
) -> SweepRow:
    errs = np.array([o.errors for o in outcomes if o.errors is not None], dtype=float)
    exceptions = sum(o.failure is not None for o in outcomes)
    if errs.size:
        outliers = int(np.sum(np.max(np.abs(errs), axis=1) > threshold))
        rmse = float(np.sqrt(np.mean(errs ** 2)))
        per_source = tuple(float(v) for v in np.sqrt(np.mean(errs ** 2, axis=0)))
    else:
        outliers, rmse, per_source = 0, math.nan, ()
    devs = [o.deviation for o in outcomes if o.deviation is not None]
    return SweepRow(
        variant=variant,
        snr_db=float(snr_db),
        snapshots=scenario.num_snapshots,
        trials=len(outcomes),
        failures=exceptions + outliers,
        exceptions=exceptions,
        rmse_deg=rmse,
        rmse_per_source=per_source,
        mean_xi_empirical=_nanmean(d.xi_empirical for d in devs),
        mean_xi_quadratic=_nanmean(d.xi_quadratic for d in devs),
        xi_expected=_nanmean(d.xi_expected for d in devs),
        elapsed_seconds=elapsed,
    )


def _grid(config: ExperimentConfig):
    for T in config.snapshot_grid:
        for snr in config.snr_grid_db:
            yield snr, config.scenario.with_snapshots(T).with_snr(snr)


def _run_point(config, scenario, snr_db, threads):
    start = time.perf_counter()
    trials = _map(lambda t: run_trial(config, scenario, t, snr_db), range(config.trials), threads)
    return trials, time.perf_counter() - start


def run_sweep(config: ExperimentConfig, threads: Optional[int] = None) -> SweepResult:
    """One row per ``(variant, SNR, T)`` over the configured grids."""
    rows = []
    for snr, scenario in _grid(config):
        trials, elapsed = _run_point(config, scenario, snr, threads)
        for v in config.variants:
            rows.append(_aggregate(v, scenario, snr, [t[v] for t in trials],
                                   config.outlier_threshold_deg, elapsed))
    return SweepResult(rows)


def run_rmse_sweep(config: ExperimentConfig, threads: Optional[int] = None) -> SweepResult:
    """Permutation-matched RMSE against SNR (one row per variant and grid point)."""
    return run_sweep(config, threads)


def run_deviation_sweep(config: ExperimentConfig, threads: Optional[int] = None) -> SweepResult:
    """Trial means of the empirical and first-order deviation plus its expectation.

    Classic rows use the uncompressed array (``Phi = I``).
    """
    return run_sweep(config, threads)


@dataclass
class Example1Result:
    sweep: SweepResult
    trials: List[Dict[str, TrialOutcome]]
    scenario: SourceScenario

    def estimate_columns(self, variants: Sequence[str]) -> List[str]:
        M = self.scenario.num_sources
        cols = ["trial"]
        for v in variants:
            cols.append(f"{v}_status")
            cols += [f"{v}_est_{i + 1}" for i in range(M)]
            cols += [f"{v}_err_{i + 1}" for i in range(M)]
        return cols

    def estimate_rows(self, variants: Sequence[str]):
        M = self.scenario.num_sources
        for t, outcomes in enumerate(self.trials):
            row = [t]
            for v in variants:
                o = outcomes[v]
                if o.estimate is None:
                    row += ["failed"] + [math.nan] * (2 * M)
                else:
                    row += ["ok", *o.estimate.angles_deg, *o.errors]
            yield row

    ROOT_COLUMNS = ("variant", "trial", "index", "real", "imag", "modulus", "selected")

    def root_rows(self, variants: Sequence[str]):
        for v in variants:
            for t, outcomes in enumerate(self.trials):
                est = outcomes[v].estimate
                if est is None:
                    continue
                for i, z in enumerate(est.all_roots):
                    yield (v, t, i, z.real, z.imag, abs(z), False)
                for i, z in enumerate(est.selected_roots):
                    yield (v, t, i, z.real, z.imag, abs(z), True)


def run_example1(config: ExperimentConfig, threads: Optional[int] = None) -> Example1Result:
    """Per-trial estimates and root constellations at the first grid point."""
    scenario = config.scenario
    snr = config.snr_grid_db[0]
    trials, elapsed = _run_point(config, scenario, snr, threads)
    rows = [
        _aggregate(v, scenario, snr, [t[v] for t in trials],
                   config.outlier_threshold_deg, elapsed)
        for v in config.variants
    ]
    return Example1Result(SweepResult(rows), trials, scenario)


@dataclass
class TimingReport:
    N: int
    m: int
    repeats: int
    eig_full_seconds: float
    eig_compressed_seconds: float
    pipeline_seconds: Dict[str, float]
    rooting_degree: Dict[str, int]

    @property
    def eig_speedup(self) -> float:
        return self.eig_full_seconds / self.eig_compressed_seconds

    COLUMNS = ("stage", "variant", "matrix_size", "rooting_degree", "repeats")

    def csv_rows(self):
        rows = [("eigendecomposition", CLASSIC, self.N, "", self.repeats),
                ("eigendecomposition", CS, self.m, "", self.repeats)]
        for v in sorted(self.pipeline_seconds):
            size = self.N if v == CLASSIC else self.m
            rows.append(("pipeline", v, size, self.rooting_degree[v], self.repeats))
        return rows

    def measurements(self) -> Dict[str, float]:
        out = {
            "eigendecomposition_full_median_s": self.eig_full_seconds,
            "eigendecomposition_compressed_median_s": self.eig_compressed_seconds,
            "eigendecomposition_speedup": self.eig_speedup,
        }
        for v, s in sorted(self.pipeline_seconds.items()):
            out[f"pipeline_{v}_median_s"] = s
        return out


def median_time(fn, repeats: int) -> float:
    fn()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def run_timing(config: ExperimentConfig) -> TimingReport:
    """Median wall-clock time of the eigendecomposition stage at sizes N and m.

    The rooted polynomial has degree ``2(N - 1)`` for both variants, since the
    compressed steering vector still spans all ``N`` sensor lags.
    """
    geometry = config.geometry
    scenario = config.scenario
    M = scenario.num_sources
    snapshots = synthesize_snapshots(scenario, geometry, trial_seeds(config.master_seed, 0)[1])
    phi = _phi_for(config, 0)
    R_x = sample_covariance(snapshots).data
    R_y = sample_covariance(compress(phi, snapshots)).data
    reps = config.timing_repeats
    eig_full = median_time(lambda: eigendecompose_hermitian(R_x), reps)
    eig_small = median_time(lambda: eigendecompose_hermitian(R_y), reps)
    pipeline, degree = {}, {}
    for v in config.variants:
        p = phi if v == CS else None
        pipeline[v] = median_time(lambda: estimate_doa(snapshots, M, v, geometry, p),
                                  max(5, reps // 10))
        R = R_y if v == CS else R_x
        split = split_subspaces(eigendecompose_hermitian(R), M)
        degree[v] = build_polynomial(noise_projector(split), p).degree
    return TimingReport(geometry.num_sensors, phi.m, reps, eig_full, eig_small, pipeline, degree)


def random_lemma_instance(dimension: int, seed) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A random PSD covariance and two arbitrary complex matrices."""
    rng = make_rng(seed)
    k = dimension

    def cgauss():
        return (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / np.sqrt(2)

    B = cgauss()
    R = B @ B.conj().T / k + 0.1 * np.eye(k)
    return R, cgauss(), cgauss()


@dataclass
class LemmaResult:
    trials: int
    snapshots: int
    dimension: int
    error_2a: float
    error_2b: float

    COLUMNS = ("lemma", "dimension", "snapshots", "trials", "relative_error")

    def csv_rows(self):
        return [("2a", self.dimension, self.snapshots, self.trials, self.error_2a),
                ("2b", self.dimension, self.snapshots, self.trials, self.error_2b)]


def run_lemma_check(config: ExperimentConfig) -> LemmaResult:
    """Both second-order moment lemmas on one random instance."""
    R, C1, C2 = random_lemma_instance(
        config.lemma_dimension, _seed_sequence(config.master_seed, 2, 0)
    )
    T, n = config.lemma_snapshots, config.trials
    seed = _seed_sequence(config.master_seed, 2, 1)
    return LemmaResult(
        n, T, config.lemma_dimension,
        lemma2a_check(R, C1, T, n, seed),
        lemma2b_check(R, C1, C2, T, n, seed),
    )


def lemma_scaling(
    R, C1, C2, T: int, small: int = 1000, large: int = 100_000,
    reps_small: int = 100, reps_large: int = 10, seed: int = 0,
) -> Dict[str, Tuple[float, float]]:
    """RMS relative error over independent repetitions at two trial counts.

    Returns ``{"2a": (err_small, err_large), "2b": (...)}``; for Monte Carlo
    averaging the ratio should be near ``sqrt(large / small)``.
    """
    out = {}
    for name, check in (("2a", lambda n, s: lemma2a_check(R, C1, T, n, s)),
                        ("2b", lambda n, s: lemma2b_check(R, C1, C2, T, n, s))):
        errs = []
        for n, reps, tag in ((small, reps_small, 0), (large, reps_large, 1)):
            e = [check(n, _seed_sequence(seed, 3, tag, r)) for r in range(reps)]
            errs.append(float(np.sqrt(np.mean(np.square(e)))))
        out[name] = (errs[0], errs[1])
    return out
