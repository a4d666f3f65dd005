import math
from dataclasses import replace

import numpy as np
import pytest

from csdoa.array_model import ArrayGeometry, synthesize_snapshots
from csdoa.compression import RAW_GAUSSIAN, MeasurementMatrix, draw_measurement_matrix
from csdoa.deviation import SIGMA_ESTIMATED
from csdoa.harness.config import preset
from csdoa.harness.experiments import (
    SWEEP_COLUMNS,
    lemma_scaling,
    median_time,
    random_lemma_instance,
    run_deviation_sweep,
    run_example1,
    run_lemma_check,
    run_rmse_sweep,
    run_timing,
    thread_count,
    trial_seeds,
)
from csdoa.harness.output import format_value, read_csv, write_csv
from csdoa.rootmusic import CLASSIC, CS, estimate_doa, match_to_truth


def _text(rows):
    return [[format_value(v) for v in row] for row in rows]


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("CSDOA_THREADS", "3")
    assert thread_count() == 3
    assert thread_count(5) == 5
    monkeypatch.setenv("CSDOA_THREADS", "0")
    assert thread_count() == 1


def test_trial_seeds_distinct_and_stable():
    seeds = {trial_seeds(42, t) for t in range(100)}
    assert len(seeds) == 100
    assert trial_seeds(42, 3) == trial_seeds(42, 3) != trial_seeds(43, 3)


def test_sweep_rows_and_thread_independence():
    config = replace(preset("rmse-sweep"), trials=6, snapshot_grid=(50, 100))
    a = run_rmse_sweep(config, threads=1)
    b = run_rmse_sweep(config, threads=4)
    assert len(a.rows) == len(config.variants) * 5 * 2
    assert _text(a.csv_rows()) == _text(b.csv_rows())
    assert all(len(r) == len(SWEEP_COLUMNS) for r in a.csv_rows())
    assert all(r.rmse_deg >= 0 for r in a.rows)


def test_csv_row_count(tmp_path):
    config = replace(preset("example1"), trials=3)
    res = run_example1(config, threads=1)
    v = config.variants
    n = write_csv(tmp_path / "e.csv", res.estimate_columns(v), res.estimate_rows(v))
    cols, rows = read_csv(tmp_path / "e.csv")
    assert n == len(rows) == 3 and len(cols) == len(rows[0])
    assert (tmp_path / "e.csv").read_text().startswith("# csdoa-csv v1\n")


def test_single_point_matches_direct_pipeline():
    config = replace(preset("example1"), trials=4, snapshot_grid=(200,))
    res = run_example1(config, threads=1)
    s = config.scenario
    for t, outcome in enumerate(res.trials):
        phi_seed, data_seed = trial_seeds(config.master_seed, t)
        X = synthesize_snapshots(s, config.geometry, data_seed)
        phi = draw_measurement_matrix(3, 7, seed=phi_seed, M=2)
        for variant, p in ((CLASSIC, None), (CS, phi)):
            est = estimate_doa(X, 2, variant, config.geometry, p)
            np.testing.assert_array_equal(outcome[variant].estimate.angles_deg, est.angles_deg)
            np.testing.assert_array_equal(outcome[variant].errors,
                                          match_to_truth(est.angles_deg, s.angles_deg))
    row = res.sweep.row(CLASSIC, 15.0, 200)
    errs = np.array([o[CLASSIC].errors for o in res.trials])
    assert row.rmse_deg == pytest.approx(math.sqrt(np.mean(errs ** 2)), rel=1e-12)


def test_low_snr_reports_failures_without_crashing():
    config = replace(preset("example1"), trials=30, snr_grid_db=(-20.0,), snapshot_grid=(10,))
    res = run_example1(config, threads=1)
    for v in config.variants:
        assert res.sweep.row(v, -20.0, 10).failures > 0


def test_rmse_trend_classic():
    config = replace(preset("rmse-sweep"), trials=40, snr_grid_db=(0.0, 20.0),
                     variants=(CLASSIC,))
    res = run_rmse_sweep(config, threads=1)
    assert res.row(CLASSIC, 20.0, 1000).rmse_deg < res.row(CLASSIC, 0.0, 1000).rmse_deg


def test_deviation_sweep_shape_and_trend():
    config = replace(preset("deviation-sweep"), trials=40)
    res = run_deviation_sweep(config, threads=1)
    assert len(res.rows) == 2 * 5 * 3
    for v in config.variants:
        for T in (10, 50, 100):
            hi = res.row(v, 30.0, T).mean_xi_empirical
            lo = res.row(v, 0.0, T).mean_xi_empirical
            assert hi < lo


def test_high_snr_quadratic_matches_expected():
    config = replace(preset("deviation-sweep"), trials=400, snr_grid_db=(30.0,),
                     snapshot_grid=(100,), variants=(CS,))
    row = run_deviation_sweep(config, threads=1).row(CS, 30.0, 100)
    assert row.mean_xi_quadratic == pytest.approx(row.xi_expected, rel=0.1)


def test_sigma_modes_close_at_20db():
    config = replace(preset("deviation-sweep"), trials=200, snr_grid_db=(20.0,),
                     snapshot_grid=(100,), variants=(CS,))
    known = run_deviation_sweep(config, threads=1).row(CS, 20.0, 100)
    est = run_deviation_sweep(replace(config, sigma_mode=SIGMA_ESTIMATED),
                              threads=1).row(CS, 20.0, 100)
    assert est.xi_expected == pytest.approx(known.xi_expected, rel=0.05)
    assert est.mean_xi_empirical == known.mean_xi_empirical


def test_raw_gaussian_mode_runs():
    config = replace(preset("example1"), trials=5, phi_mode=RAW_GAUSSIAN)
    res = run_example1(config, threads=1)
    assert res.sweep.row(CS, 15.0, 1000).trials == 5


def test_fix_phi_uses_one_matrix():
    config = replace(preset("example1"), trials=3, fix_phi=True, variants=(CS,),
                     snapshot_grid=(100,))
    res = run_example1(config, threads=1)
    assert res.sweep.row(CS, 15.0, 100).trials == 3


def test_timing_report():
    config = replace(preset("timing"), timing_repeats=20)
    rep = run_timing(config)
    assert rep.rooting_degree == {CLASSIC: 126, CS: 126}
    assert rep.eig_speedup > 1
    assert all("seconds" not in str(c) for row in rep.csv_rows() for c in row)


def test_timing_parity_with_identity_phi():
    # the m = N bypass does the same work as the classic pipeline
    config = preset("timing")
    g = ArrayGeometry.ula(16)
    X = synthesize_snapshots(config.scenario, g, seed=0)
    eye = MeasurementMatrix.identity(16)
    classic = median_time(lambda: estimate_doa(X, 2, CLASSIC, g), 50)
    bypass = median_time(lambda: estimate_doa(X, 2, CS, g, eye), 50)
    assert 0.5 < bypass / classic < 2


def test_lemma_check_preset_small():
    res = run_lemma_check(replace(preset("lemma-check"), trials=20_000))
    assert res.error_2a < 0.1 and res.error_2b < 0.1
    assert len(res.csv_rows()) == 2


def test_lemma_scaling_small():
    R, C1, C2 = random_lemma_instance(3, 0)
    out = lemma_scaling(R, C1, C2, 5, small=200, large=5000, reps_small=20, reps_large=5)
    for small, large in out.values():
        assert small > large
