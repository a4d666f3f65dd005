"""Finite-snapshot subspace deviation and its first-order prediction.

The deviation of an estimated signal basis ``P_hat`` is the mean energy its
columns leak into the true noise subspace. To first order in
``dR = R - R_hat`` it equals ``(1/M) Tr{V+ dR Gamma dR V+}`` with
``V = R - sigma^2 I``, whose expectation over complex Gaussian snapshots is

    E[xi] = (k - M) sigma^2 / (T M) * sum_j lambda_j / (lambda_j - sigma^2)^2

over the ``M`` signal eigenvalues of ``R`` (``k - M = 1`` for ``m = M + 1``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .array_model import (
    ArrayGeometry,
    SourceScenario,
    make_rng,
    steering_matrix,
    synthesize_snapshots,
)
from .compression import MeasurementMatrix, compress
from .errors import DegenerateError, DomainError
from .spectral import (
    eigendecompose_hermitian,
    exact_covariance,
    noise_projector,
    sample_covariance,
    split_subspaces,
)

__all__ = [
    "SIGMA_KNOWN",
    "SIGMA_ESTIMATED",
    "DeviationInputs",
    "DeviationReport",
    "IdentityReport",
    "empirical_deviation",
    "quadratic_form_deviation",
    "expected_deviation",
    "lemma2a_check",
    "lemma2b_check",
    "identity_checks",
    "deviation_report",
    "deviation_trial",
]

SIGMA_KNOWN = "known"
SIGMA_ESTIMATED = "estimated"
PINV_RCOND = 1e-10


@dataclass(frozen=True)
class DeviationInputs:
    R_true: np.ndarray
    R_hat: np.ndarray
    sigma2: float
    M: int
    T: int

    def __post_init__(self):
        R = np.asarray(self.R_true, dtype=complex)
        Rh = np.asarray(self.R_hat, dtype=complex)
        if R.shape != Rh.shape or R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise DomainError(f"covariance shapes differ: {R.shape} vs {Rh.shape}")
        if self.T < 1:
            raise DomainError("T must be >= 1")
        if not self.sigma2 > 0:
            raise DomainError("sigma2 must be positive")
        if not 0 < self.M < R.shape[0]:
            raise DomainError(f"need 0 < M < {R.shape[0]}, got M={self.M}")
        object.__setattr__(self, "R_true", R)
        object.__setattr__(self, "R_hat", Rh)

    @property
    def delta(self) -> np.ndarray:
        return self.R_true - self.R_hat


@dataclass(frozen=True)
class DeviationReport:
    xi_empirical: float
    xi_quadratic: float
    xi_expected: float
    snr_db: float
    T: int
    # True when the closed form is applied beyond the m = M + 1 case
    extrapolated: bool = False


def empirical_deviation(signal_basis_est: np.ndarray, gamma_N_true: np.ndarray, M: int) -> float:
    """``(1/M) sum_j ||Gamma_N v_j||^2`` over estimated signal eigenvectors."""
    P = np.asarray(signal_basis_est, dtype=complex)
    G = np.asarray(gamma_N_true, dtype=complex)
    if P.ndim != 2 or G.shape != (P.shape[0], P.shape[0]) or P.shape[1] != M:
        raise DomainError(
            f"basis {P.shape} and projector {G.shape} do not fit M={M}"
        )
    leak = G @ P
    return float(np.sum(np.abs(leak) ** 2) / M)


def _true_projector(R_true: np.ndarray, M: int) -> np.ndarray:
    return noise_projector(split_subspaces(eigendecompose_hermitian(R_true), M))


def quadratic_form_deviation(
    inputs: DeviationInputs, gamma_N_true: Optional[np.ndarray] = None
) -> float:
    """First-order deviation ``(1/M) Tr{V+ dR Gamma dR V+}``.

    ``V+`` is the pseudo-inverse of ``R_true - sigma^2 I`` with singular
    values below ``1e-10 * sigma_max`` discarded.

    Raises
    ------
    DegenerateError
        If ``V`` is numerically zero (no signal).
    """
    R = inputs.R_true
    k = R.shape[0]
    if gamma_N_true is None:
        gamma_N_true = _true_projector(R, inputs.M)
    V = R - inputs.sigma2 * np.eye(k)
    if np.linalg.norm(V, 2) <= 1e-12 * max(np.linalg.norm(R, 2), 1e-300):
        raise DegenerateError("V = R - sigma^2 I vanishes; no signal subspace")
    V_pinv = np.linalg.pinv(V, rcond=PINV_RCOND, hermitian=True)
    dR = inputs.delta
    W = dR @ V_pinv
    # Tr{V+ dR G dR V+} = Tr{W^H G W} since V+ and dR are Hermitian
    value = np.real(np.trace(W.conj().T @ gamma_N_true @ W)) / inputs.M
    return float(max(value, 0.0))


def expected_deviation(
    eigenvalues_ascending: Sequence[float],
    sigma2: float,
    T: int,
    M: int,
    noise_dim: int = 1,
) -> float:
    """Closed-form expectation of the first-order deviation.

    Uses the ``M`` largest eigenvalues. ``noise_dim`` is the noise-subspace
    dimension ``k - M``; the default of 1 is the ``m = M + 1`` case.

    Raises
    ------
    DomainError
        If a signal eigenvalue does not exceed ``sigma2``.
    """
    lam = np.sort(np.asarray(eigenvalues_ascending, dtype=float))
    if M < 1 or lam.size <= M - 1 or T < 1:
        raise DomainError(f"invalid M={M}, T={T} for {lam.size} eigenvalues")
    signal = lam[-M:]
    if sigma2 == 0:
        return 0.0
    if np.any(signal <= sigma2):
        raise DomainError("signal eigenvalues must exceed the noise variance")
    total = np.sum(signal / (signal - sigma2) ** 2)
    return float(noise_dim * sigma2 / (T * M) * total)


def _sqrtm_psd(R: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh((R + R.conj().T) / 2)
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def _delta_batches(R: np.ndarray, T: int, trials: int, rng, chunk: int = 20_000):
    """Yield stacks of ``R - R_hat`` for complex Gaussian data with covariance R."""
    k = R.shape[0]
    L = _sqrtm_psd(R)
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        Z = (rng.standard_normal((n, k, T)) + 1j * rng.standard_normal((n, k, T))) / np.sqrt(2)
        X = L @ Z
        R_hat = np.einsum("nit,njt->nij", X, X.conj()) / T
        yield R - R_hat
        done += n


def lemma2a_check(R, C1, T: int, trials: int, seed) -> float:
    """Relative Frobenius error of Monte Carlo ``E[dR C1 dR]`` vs ``Tr{R C1} R / T``.

    Returns 0 when both sides vanish.
    """
    R = np.asarray(R, dtype=complex)
    C1 = np.asarray(C1, dtype=complex)
    rng = make_rng(seed)
    acc = np.zeros_like(R)
    for dR in _delta_batches(R, T, trials, rng):
        acc += np.sum(dR @ C1 @ dR, axis=0)
    mc = acc / trials
    closed = np.trace(R @ C1) * R / T
    return _relative_error(mc, closed)


def lemma2b_check(R, C1, C2, T: int, trials: int, seed) -> float:
    """Relative error of ``E[Tr{dR C1} Tr{dR C2}]`` vs ``Tr{R C1 R C2} / T``."""
    R = np.asarray(R, dtype=complex)
    C1 = np.asarray(C1, dtype=complex)
    C2 = np.asarray(C2, dtype=complex)
    rng = make_rng(seed)
    acc = 0.0 + 0.0j
    for dR in _delta_batches(R, T, trials, rng):
        t1 = np.einsum("nij,ji->n", dR, C1)
        t2 = np.einsum("nij,ji->n", dR, C2)
        acc += np.sum(t1 * t2)
    mc = acc / trials
    closed = np.trace(R @ C1 @ R @ C2) / T
    return _relative_error(np.atleast_1d(mc), np.atleast_1d(closed))


def _relative_error(estimate: np.ndarray, reference: np.ndarray) -> float:
    ref = np.linalg.norm(reference)
    diff = np.linalg.norm(estimate - reference)
    if ref == 0:
        return 0.0 if diff == 0 else float("inf")
    return float(diff / ref)


class IdentityReport(NamedTuple):
    noise_trace: float
    noise_trace_expected: float
    noise_trace_residual: float
    pinv_trace: float
    pinv_trace_expected: float
    pinv_trace_residual: float


def identity_checks(R_true, sigma2: float, M: int) -> IdentityReport:
    """Residuals of the two trace identities on an exact covariance.

    ``Tr{Gamma_N R} = (k - M) sigma^2`` and
    ``Tr{V+ V+ R} = sum_j lambda_j / (lambda_j - sigma^2)^2``; residuals are
    relative.
    """
    R = np.asarray(R_true, dtype=complex)
    k = R.shape[0]
    split = split_subspaces(eigendecompose_hermitian(R), M)
    gamma = noise_projector(split)
    noise_trace = float(np.real(np.trace(gamma @ R)))
    noise_expected = (k - M) * sigma2
    V_pinv = np.linalg.pinv(R - sigma2 * np.eye(k), rcond=PINV_RCOND, hermitian=True)
    pinv_trace = float(np.real(np.trace(V_pinv @ V_pinv @ R)))
    lam = split.signal_eigenvalues
    pinv_expected = float(np.sum(lam / (lam - sigma2) ** 2))
    return IdentityReport(
        noise_trace,
        noise_expected,
        abs(noise_trace - noise_expected) / noise_expected,
        pinv_trace,
        pinv_expected,
        abs(pinv_trace - pinv_expected) / pinv_expected,
    )


def deviation_report(
    R_true,
    R_hat,
    sigma2: float,
    M: int,
    T: int,
    snr_db: float = float("nan"),
    sigma_mode: str = SIGMA_KNOWN,
) -> DeviationReport:
    """All three deviation quantities for one covariance estimate.

    With ``sigma_mode="estimated"`` the closed form is evaluated on the
    eigenvalues of ``R_hat`` with the noise variance taken as the mean of
    its ``k - M`` smallest eigenvalues; the other two quantities always use
    the true model.
    """
    inputs = DeviationInputs(R_true, R_hat, sigma2, M, T)
    k = inputs.R_true.shape[0]
    true_split = split_subspaces(eigendecompose_hermitian(inputs.R_true), M)
    gamma = noise_projector(true_split)
    est_split = split_subspaces(eigendecompose_hermitian(inputs.R_hat), M)
    xi_emp = empirical_deviation(est_split.signal_basis, gamma, M)
    xi_quad = quadratic_form_deviation(inputs, gamma)
    if sigma_mode == SIGMA_KNOWN:
        lam, s2 = true_split.eigenvalues, sigma2
    elif sigma_mode == SIGMA_ESTIMATED:
        lam, s2 = est_split.eigenvalues, est_split.noise_floor_estimate
    else:
        raise DomainError(f"unknown sigma mode {sigma_mode!r}")
    xi_exp = expected_deviation(lam, s2, T, M, noise_dim=k - M)
    return DeviationReport(xi_emp, xi_quad, xi_exp, snr_db, T, extrapolated=k - M > 1)


def deviation_trial(
    scenario: SourceScenario,
    geometry: ArrayGeometry,
    phi: Optional[MeasurementMatrix],
    seed,
    sigma_mode: str = SIGMA_KNOWN,
) -> DeviationReport:
    """Synthesize one snapshot set and report its subspace deviation.

    ``phi=None`` evaluates the uncompressed array (classic root-MUSIC).
    """
    snapshots = synthesize_snapshots(scenario, geometry, seed)
    A = steering_matrix(geometry, scenario.angles_deg)
    R_true = exact_covariance(A, scenario.powers, scenario.noise_variance).data
    data = snapshots
    if phi is not None:
        data = compress(phi, snapshots)
        R_true = phi.data @ R_true @ phi.data.T
    R_hat = sample_covariance(data).data
    return deviation_report(
        R_true,
        R_hat,
        scenario.noise_variance,
        scenario.num_sources,
        scenario.num_snapshots,
        scenario.snr_db,
        sigma_mode,
    )
