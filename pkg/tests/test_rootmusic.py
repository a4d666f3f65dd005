import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import music_peaks, null_spectrum_direct

from csdoa.array_model import (
    ArrayGeometry,
    SnapshotMatrix,
    SourceScenario,
    steering_matrix,
    synthesize_snapshots,
)
from csdoa.compression import MeasurementMatrix, draw_measurement_matrix
from csdoa.errors import (
    AmbiguousRootError,
    BoundError,
    DegenerateError,
    DomainError,
    GeometryError,
    RankError,
)
from csdoa.rootmusic import (
    CLASSIC,
    CS,
    RootingPolynomial,
    build_polynomial,
    doa_from_covariance,
    estimate_doa,
    find_roots,
    match_to_truth,
    select_doa_roots,
)
from csdoa.spectral import (
    eigendecompose_hermitian,
    exact_covariance,
    noise_projector,
    split_subspaces,
)


def _projector(R, M):
    return noise_projector(split_subspaces(eigendecompose_hermitian(R), M))


def _compressed(R, phi):
    return phi.data @ np.asarray(R) @ phi.data.T


def test_zero_projector_is_degenerate():
    with pytest.raises(DegenerateError):
        build_polynomial(np.zeros((3, 3)), draw_measurement_matrix(3, 7, seed=0))


def test_identity_projector_coefficients():
    poly = build_polynomial(np.eye(5))
    expected = np.zeros(9)
    expected[4] = 5
    np.testing.assert_array_equal(poly.coefficients, expected)
    assert poly.origin == CLASSIC and poly.max_lag == 4 and poly.degree == 8


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        build_polynomial(np.eye(4), draw_measurement_matrix(3, 7, seed=0))


@pytest.mark.parametrize("use_phi", [False, True])
def test_polynomial_matches_direct_evaluation(example1_model, use_phi, rng):
    geometry, _, _, _, R, phi = example1_model
    if use_phi:
        G = _projector(_compressed(R, phi), 2)
        poly = build_polynomial(G, phi)
        assert poly.origin == CS
    else:
        G = _projector(np.asarray(R), 2)
        poly = build_polynomial(G)
    zs = np.exp(1j * rng.uniform(-np.pi, np.pi, 6)) * rng.uniform(0.5, 1.5, 6)
    for z in zs:
        direct = null_spectrum_direct(G, phi.data if use_phi else None, np.arange(7), z)
        assert abs(poly(z) - direct) < 1e-12 * max(1, abs(direct))


def test_conjugate_symmetry(example1_model):
    _, _, _, _, R, phi = example1_model
    c = build_polynomial(_projector(_compressed(R, phi), 2), phi).coefficients
    np.testing.assert_allclose(c[::-1], c.conj(), atol=1e-10)


@pytest.mark.parametrize("use_phi", [False, True])
def test_vanishes_at_true_angles(example1_model, use_phi):
    geometry, angles, _, _, R, phi = example1_model
    if use_phi:
        poly = build_polynomial(_projector(_compressed(R, phi), 2), phi)
    else:
        poly = build_polynomial(_projector(np.asarray(R), 2))
    gamma = 2 * np.pi * 0.5 * np.sin(np.deg2rad(angles))
    assert np.all(np.abs(poly(np.exp(1j * gamma))) < 1e-8)


def test_roots_of_z_squared_minus_one():
    roots = find_roots(RootingPolynomial(np.array([-1.0, 0.0, 1.0])))
    np.testing.assert_allclose(np.sort(roots.real), [-1, 1], atol=1e-12)


def test_zero_polynomial_rejected():
    with pytest.raises(DegenerateError):
        find_roots(RootingPolynomial(np.zeros(5)))


def test_trims_vanishing_leading_coefficients():
    # 1 + z with tiny z^2, z^3 tails
    roots = find_roots(RootingPolynomial(np.array([1.0, 1.0, 1e-15, 1e-16, 0.0])))
    np.testing.assert_allclose(roots, [-1.0], atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_conjugate_reciprocal_pairing(seed):
    phi = draw_measurement_matrix(3, 7, seed=seed, M=2)
    g = ArrayGeometry.ula(7)
    s = SourceScenario([20.0, -50.0], noise_variance=0.1, num_snapshots=30)
    Y = phi.data @ synthesize_snapshots(s, g, seed=seed).data
    R = Y @ Y.conj().T / 30
    roots = find_roots(build_polynomial(_projector(R, 2), phi))
    assert len(roots) == 12
    for z in roots[np.abs(roots) < 1 - 1e-6]:
        assert np.min(np.abs(roots - 1 / np.conj(z))) < 1e-6


def test_exact_model_two_roots_on_circle(example1_model):
    geometry, angles, _, _, R, phi = example1_model
    G = _projector(_compressed(R, phi), 2)
    roots = find_roots(build_polynomial(G, phi))
    inside = roots[np.abs(roots) <= 1 + 1e-6]
    near = inside[np.abs(1 - np.abs(inside)) < 1e-6]
    # a double root splits into a pair straddling the circle
    phases = np.unique(np.round(np.angle(near), 4))
    assert len(phases) == 2
    found = np.sort(np.rad2deg(np.arcsin(phases / np.pi)))
    oracle = music_peaks(G, phi.data, geometry.position_array, 2)
    np.testing.assert_allclose(found, oracle, atol=0.01)


def test_select_root_on_circle():
    est = select_doa_roots([1.0 + 0j, 0.3 + 0j, 1 / 0.3 + 0j], 1)
    assert est.angles_deg[0] == pytest.approx(0.0, abs=1e-12)
    est = select_doa_roots([1j, 2.0, 0.5], 1, spacing_ratio=0.5)
    assert est.angles_deg[0] == pytest.approx(30.0, abs=1e-12)


def test_select_ties_prefer_larger_modulus():
    # both within the interior tolerance and equally far from the circle
    outside, inside = (1 + 5e-10) * np.exp(0.5j), (1 - 5e-10) * np.exp(1.0j)
    est = select_doa_roots([inside, outside], 1)
    assert est.selected_roots[0] == outside
    est = select_doa_roots([0.5 * np.exp(0.5j), 0.9 * np.exp(-0.3j)], 1)
    assert est.selected_roots[0] == 0.9 * np.exp(-0.3j)


def test_select_ambiguous_and_rank():
    with pytest.raises(AmbiguousRootError):
        select_doa_roots([np.exp(1j * np.pi)], 1, spacing_ratio=0.5)
    with pytest.raises(RankError):
        select_doa_roots([2.0 + 0j, 3.0 + 0j], 1)


def test_select_does_not_pick_both_pair_members():
    z = 0.999 * np.exp(0.7j)
    roots = np.array([z, 1 / np.conj(z), 0.5 * np.exp(-1.2j), 2 * np.exp(-1.2j)])
    est = select_doa_roots(roots, 2)
    assert len(np.unique(np.round(est.angles_deg, 6))) == 2


def test_exact_recovery_both_variants(example1_model):
    geometry, angles, _, _, R, phi = example1_model
    truth = np.sort(angles)
    classic = doa_from_covariance(np.asarray(R), 2, CLASSIC, geometry)
    cs = doa_from_covariance(_compressed(R, phi), 2, CS, geometry, phi)
    np.testing.assert_allclose(classic.angles_deg, truth, atol=1e-6)
    np.testing.assert_allclose(cs.angles_deg, truth, atol=1e-6)
    assert np.all(np.abs(cs.selected_roots) <= 1 + 1e-9)


@settings(max_examples=20, deadline=None)
@given(st.data())
def test_exact_recovery_random_scenarios(data):
    N = data.draw(st.integers(4, 12))
    M = data.draw(st.integers(1, min(4, N - 2)))
    m = data.draw(st.integers(M + 1, N - 1))
    seed = data.draw(st.integers(0, 2**32 - 1))
    r = np.random.default_rng(seed)
    # well separated angles keep the exact subspace well conditioned
    while True:
        angles = np.sort(r.uniform(-70, 70, M))
        if M == 1 or np.min(np.diff(angles)) > 10:
            break
    g = ArrayGeometry.ula(N)
    powers = r.uniform(0.5, 2.0, M)
    R = exact_covariance(steering_matrix(g, angles), powers, 0.1).data
    phi = draw_measurement_matrix(m, N, seed=seed, M=M)
    est = doa_from_covariance(_compressed(R, phi), M, CS, g, phi)
    np.testing.assert_allclose(est.angles_deg, angles, atol=1e-6)


def test_noise_free_single_source_broadside():
    g = ArrayGeometry.ula(7)
    s = SourceScenario([0.0], noise_variance=0.0, num_snapshots=50)
    X = synthesize_snapshots(s, g, seed=3)
    phi = draw_measurement_matrix(2, 7, seed=3, M=1)
    for variant, p in ((CLASSIC, None), (CS, phi)):
        est = estimate_doa(X, 1, variant, g, p)
        assert abs(est.angles_deg[0]) < 1e-6


def test_classic_equivalence_with_identity_phi():
    g = ArrayGeometry.ula(7)
    s = SourceScenario([20.0, -50.0], noise_variance=0.05, num_snapshots=200)
    X = synthesize_snapshots(s, g, seed=9)
    classic = estimate_doa(X, 2, CLASSIC, g)
    cs = estimate_doa(X, 2, CS, g, MeasurementMatrix.identity(7))
    np.testing.assert_allclose(cs.angles_deg, classic.angles_deg, atol=1e-9)


@pytest.mark.parametrize("alpha", [1e-3, 0.5, 7.0, 1e4])
def test_scale_invariance(alpha):
    g = ArrayGeometry.ula(7)
    s = SourceScenario([20.0, -50.0], noise_variance=0.05, num_snapshots=200)
    X = synthesize_snapshots(s, g, seed=2)
    phi = draw_measurement_matrix(3, 7, seed=2, M=2)
    for variant, p in ((CLASSIC, None), (CS, phi)):
        a = estimate_doa(X, 2, variant, g, p).angles_deg
        b = estimate_doa(SnapshotMatrix(alpha * X.data), 2, variant, g, p).angles_deg
        np.testing.assert_allclose(b, a, atol=1e-9)


def test_non_uniform_geometry():
    g = ArrayGeometry(6, positions=(0.0, 0.5, 1.5, 2.0, 3.5, 4.0))
    assert not g.is_uniform
    s = SourceScenario([15.0, -30.0], noise_variance=0.0, num_snapshots=40)
    X = synthesize_snapshots(s, g, seed=1)
    with pytest.raises(GeometryError) as info:
        estimate_doa(X, 2, CLASSIC, g)
    assert info.value.stage == "validate"
    phi = draw_measurement_matrix(3, 6, seed=4, M=2)
    est = estimate_doa(X, 2, CS, g, phi)
    np.testing.assert_allclose(est.angles_deg, [-30.0, 15.0], atol=1e-6)


def test_off_grid_positions_rejected_for_cs():
    g = ArrayGeometry(4, positions=(0.0, 0.5, 1.3, 2.0))
    X = SnapshotMatrix(np.ones((4, 5), dtype=complex))
    with pytest.raises(GeometryError):
        estimate_doa(X, 1, CS, g, draw_measurement_matrix(2, 4, seed=0))


def test_cs_gate_and_stage_tags():
    g = ArrayGeometry.ula(7)
    X = SnapshotMatrix(np.ones((7, 5), dtype=complex))
    with pytest.raises(DomainError):
        estimate_doa(X, 2, CS, g, None)
    with pytest.raises(BoundError) as info:
        estimate_doa(X, 2, CS, g, draw_measurement_matrix(2, 7, seed=0))
    assert info.value.stage == "validate"
    with pytest.raises(DomainError):
        estimate_doa(X, 2, "esprit", g)


def test_error_stage_tags_numerical_failures():
    g = ArrayGeometry.ula(2)
    # noise projector diag(0, 1) leaves only a root at the origin, which has no direction
    with pytest.raises(DegenerateError) as info:
        doa_from_covariance(np.diag([1.0, 0.0]), 1, CLASSIC, g)
    assert info.value.stage == "select_roots"


def test_no_sources_returns_empty_estimate():
    est = doa_from_covariance(np.eye(4), 0, CLASSIC, ArrayGeometry.ula(4))
    assert est.angles_deg.size == 0


def test_match_to_truth():
    np.testing.assert_allclose(match_to_truth([-49.0, 21.0], [20.0, -50.0]), [1.0, 1.0])
    np.testing.assert_allclose(match_to_truth([0.5], [0.0]), [0.5])
    with pytest.raises(DomainError):
        match_to_truth([1.0], [1.0, 2.0])
