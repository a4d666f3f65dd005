"""Root-MUSIC for full and compressed arrays.

For a noise projector ``Gamma`` of the (possibly compressed) covariance and a
real measurement matrix ``Phi``, the null spectrum on the unit circle is

    p(z) = a(1/z)^T Phi^T Gamma Phi a(z),    a(z)_n = z^(-k_n)

where ``k_n`` is the grid index of sensor ``n``. With ``G = Phi^T Gamma Phi``
the coefficient of ``z^k`` is the sum of ``G[i, j]`` over ``k_i - k_j = k``.
For a uniform array and ``Phi = I`` this is the classic root-MUSIC
polynomial. The true directions are double roots on the unit circle.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .array_model import ArrayGeometry, SnapshotMatrix
from .compression import IDENTITY, MeasurementMatrix, compress, validate_m
from .errors import (
    AmbiguousRootError,
    BoundError,
    CsdoaError,
    DegenerateError,
    DomainError,
    GeometryError,
    RankError,
)
from .spectral import (
    eigendecompose_hermitian,
    noise_projector,
    sample_covariance,
    split_subspaces,
)

__all__ = [
    "CLASSIC",
    "CS",
    "RootingPolynomial",
    "DoaEstimate",
    "build_polynomial",
    "find_roots",
    "select_doa_roots",
    "doa_from_covariance",
    "estimate_doa",
    "match_to_truth",
]

CLASSIC = "classic"
CS = "cs"
VARIANTS = (CLASSIC, CS)

TRIM_TOL = 1e-12
RESIDUAL_TOL = 1e-6
INTERIOR_TOL = 1e-9
PAIR_TOL = 1e-4


@dataclass(frozen=True)
class RootingPolynomial:
    """Laurent polynomial ``sum_k c_k z^k`` for ``k = -L..L``.

    ``coefficients[i]`` holds ``c_{i - L}``; read as an ordinary ascending
    coefficient array it is ``z^L p(z)``.
    """

    coefficients: np.ndarray = field(repr=False)
    origin: str = CLASSIC

    @property
    def max_lag(self) -> int:
        return (len(self.coefficients) - 1) // 2

    @property
    def degree(self) -> int:
        """Degree of ``z^L p(z)``, the polynomial actually rooted."""
        return len(self.coefficients) - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        powers = np.arange(-self.max_lag, self.max_lag + 1)
        return np.sum(self.coefficients * z[..., None] ** powers, axis=-1)


@dataclass(frozen=True)
class DoaEstimate:
    angles_deg: np.ndarray
    selected_roots: np.ndarray = field(repr=False)
    all_roots: np.ndarray = field(repr=False)


def _phi_array(phi, k: int) -> np.ndarray:
    if phi is None:
        return np.eye(k)
    if isinstance(phi, MeasurementMatrix):
        return phi.data
    return np.asarray(phi, dtype=float)


def build_polynomial(
    gamma_N: np.ndarray,
    phi: Optional[MeasurementMatrix] = None,
    lags: Optional[Sequence[int]] = None,
) -> RootingPolynomial:
    """Rooting polynomial for a noise projector.

    Parameters
    ----------
    gamma_N : ndarray, shape (k, k)
        Noise-subspace projector of the covariance the estimator sees.
    phi : MeasurementMatrix, optional
        ``k x N`` compression matrix; ``None`` means ``Phi = I_k`` (classic).
    lags : sequence of int, optional
        Integer grid index of each of the ``N`` sensors; defaults to
        ``0..N-1`` (uniform array).
    """
    gamma_N = np.asarray(gamma_N, dtype=complex)
    k = gamma_N.shape[0]
    Phi = _phi_array(phi, k)
    if Phi.shape[0] != k or gamma_N.shape != (k, k):
        raise DomainError(
            f"projector is {gamma_N.shape} but Phi has {Phi.shape[0]} rows"
        )
    N = Phi.shape[1]
    lags = np.arange(N) if lags is None else np.asarray(lags, dtype=int)
    if lags.shape != (N,):
        raise DomainError(f"expected {N} lags, got {lags.shape}")
    G = Phi.T @ gamma_N @ Phi
    L = int(lags.max() - lags.min())
    D = (lags[:, None] - lags[None, :] + L).ravel()
    size = 2 * L + 1
    c = np.bincount(D, G.real.ravel(), size) + 1j * np.bincount(D, G.imag.ravel(), size)
    scale = max(np.linalg.norm(Phi, 2) ** 2, 1.0)
    if np.max(np.abs(c)) <= 1e-12 * scale:
        raise DegenerateError("rooting polynomial vanishes: empty noise subspace")
    origin = CLASSIC if phi is None or getattr(phi, "mode", None) == IDENTITY else CS
    return RootingPolynomial(c, origin)


def _scaled_residual(q: np.ndarray, z: complex) -> float:
    # evaluate in the variable with |.| <= 1 so every term is bounded by max|q|
    if abs(z) <= 1:
        return abs(np.polynomial.polynomial.polyval(z, q))
    return abs(np.polynomial.polynomial.polyval(1 / z, q[::-1]))


def find_roots(poly: RootingPolynomial) -> np.ndarray:
    """Roots of ``z^L p(z)`` from the eigenvalues of its companion matrix.

    Leading coefficients below ``1e-12 * max|c|`` are trimmed first.

    Raises
    ------
    DegenerateError
        For an all-zero polynomial, or if a root fails the residual check
        ``|q(z)| < 1e-6 max|c|``.
    """
    q = np.asarray(poly.coefficients, dtype=complex)
    cmax = np.max(np.abs(q)) if q.size else 0.0
    if cmax == 0:
        raise DegenerateError("cannot root the zero polynomial")
    nz = np.nonzero(np.abs(q) > TRIM_TOL * cmax)[0]
    q = q[: nz[-1] + 1]
    d = len(q) - 1
    if d == 0:
        return np.empty(0, dtype=complex)
    C = np.zeros((d, d), dtype=complex)
    C[np.arange(1, d), np.arange(d - 1)] = 1.0
    C[:, -1] = -q[:-1] / q[-1]
    roots = np.linalg.eigvals(C)
    worst = max(_scaled_residual(q, z) for z in roots)
    if worst >= RESIDUAL_TOL * cmax:
        raise DegenerateError(f"root residual {worst:.3g} exceeds tolerance")
    return roots


def _polish_double_root(q: np.ndarray, z: complex) -> complex:
    """Newton on ``q'`` from the mean of a nearly coincident pair.

    At a double root ``q'`` has a simple zero, which is resolved to machine
    precision where ``q`` itself only gives ``sqrt(eps)``.
    """
    P = np.polynomial.Polynomial(q)
    d1, d2 = P.deriv(1), P.deriv(2)
    for _ in range(8):
        g2 = d2(z)
        if g2 == 0:
            break
        step = d1(z) / g2
        if not np.isfinite(step) or abs(step) > PAIR_TOL:
            break
        z = z - step
        if abs(step) <= 1e-15 * max(abs(z), 1.0):
            break
    return z


def _merge_partners(roots: np.ndarray, tol: float, q=None) -> np.ndarray:
    """Interior candidates, each averaged with its conjugate-reciprocal partner.

    A double root on the circle splits numerically into a pair; averaging
    ``z`` with ``1/conj(w)`` keeps the phase of a genuine pair, and a
    partner that is itself interior is consumed so it is not selected twice.
    When the pair is nearly coincident and the polynomial ``q`` is given,
    the phase of the merged root is polished as a double root; its modulus
    is kept so root ranking is unaffected.
    """
    interior = np.nonzero(np.abs(roots) <= 1 + INTERIOR_TOL)[0]
    used = np.zeros(len(roots), dtype=bool)
    merged = []
    for i in interior:
        if used[i]:
            continue
        used[i] = True
        z = roots[i]
        if z == 0:
            merged.append(z)
            continue
        dists = np.abs(roots - 1 / np.conj(z))
        dists[used] = np.inf
        j = int(np.argmin(dists))
        if dists[j] < tol:
            used[j] = True
            close = abs(z - roots[j]) < tol
            z = (z + 1 / np.conj(roots[j])) / 2
            if close and q is not None:
                z = abs(z) * np.exp(1j * np.angle(_polish_double_root(q, z)))
        merged.append(z)
    return np.asarray(merged, dtype=complex)


def select_doa_roots(
    roots: Sequence[complex],
    M: int,
    spacing_ratio: float = 0.5,
    poly: Optional[RootingPolynomial] = None,
) -> DoaEstimate:
    """Pick the ``M`` interior roots closest to the unit circle.

    Passing the polynomial the roots came from enables double-root polishing
    of nearly coincident conjugate-reciprocal pairs.

    Raises
    ------
    RankError
        Fewer than ``M`` roots on or inside the unit circle.
    AmbiguousRootError
        A selected root's phase exceeds ``2 pi spacing_ratio`` in magnitude.
    """
    roots = np.asarray(roots, dtype=complex)
    q = None if poly is None else poly.coefficients
    candidates = _merge_partners(roots, PAIR_TOL, q)
    if len(candidates) < M:
        raise RankError(f"only {len(candidates)} interior roots for M={M} sources")
    radius = np.abs(candidates)
    # primary key distance to the circle, ties to the larger modulus
    order = np.lexsort((-radius, np.abs(1 - radius)))
    chosen = candidates[order[:M]]
    ratio = np.angle(chosen) / (2 * np.pi * spacing_ratio)
    if np.any(np.abs(ratio) >= 1):
        raise AmbiguousRootError(
            f"root phase outside the visible region for d/lambda={spacing_ratio}"
        )
    angles = np.rad2deg(np.arcsin(ratio))
    idx = np.argsort(angles)
    return DoaEstimate(angles[idx], chosen[idx], roots)


@contextmanager
def _stage(name: str):
    try:
        yield
    except CsdoaError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


def _resolve_lags(variant: str, geometry: ArrayGeometry) -> np.ndarray:
    if variant == CLASSIC:
        if not geometry.is_uniform:
            raise GeometryError("classic root-MUSIC needs a uniform linear array")
        return np.arange(geometry.num_sensors)
    if variant == CS:
        lags = geometry.grid_lags()
        if lags is None:
            raise GeometryError(
                "sensor positions must be integer multiples of spacing_ratio"
            )
        return lags
    raise DomainError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def _check_phi(phi: Optional[MeasurementMatrix], M: int, geometry: ArrayGeometry):
    if phi is None:
        raise DomainError("the cs variant needs a measurement matrix")
    if phi.num_sensors != geometry.num_sensors:
        raise DomainError(
            f"Phi has {phi.num_sensors} columns for {geometry.num_sensors} sensors"
        )
    if phi.mode != IDENTITY:
        check = validate_m(M, geometry.num_sensors, phi.m)
        if not check.accepted:
            raise BoundError(check.reason, check.message)


def doa_from_covariance(
    R: np.ndarray,
    M: int,
    variant: str,
    geometry: ArrayGeometry,
    phi: Optional[MeasurementMatrix] = None,
) -> DoaEstimate:
    """Root-MUSIC on a covariance already in the estimator's domain.

    For ``variant="cs"``, ``R`` is the ``m x m`` compressed covariance.
    """
    with _stage("validate"):
        lags = _resolve_lags(variant, geometry)
        if variant == CS:
            _check_phi(phi, M, geometry)
        else:
            phi = None
    with _stage("eigendecompose"):
        decomposition = eigendecompose_hermitian(R)
    with _stage("split"):
        split = split_subspaces(decomposition, M)
    with _stage("build_polynomial"):
        poly = build_polynomial(noise_projector(split), phi, lags)
    with _stage("find_roots"):
        roots = find_roots(poly)
    with _stage("select_roots"):
        return select_doa_roots(roots, M, geometry.spacing_ratio, poly)


def estimate_doa(
    snapshots: SnapshotMatrix,
    M: int,
    variant: str,
    geometry: ArrayGeometry,
    phi: Optional[MeasurementMatrix] = None,
) -> DoaEstimate:
    """Full pipeline from raw array snapshots to sorted DOA estimates.

    ``classic`` runs root-MUSIC on the ``N``-channel sample covariance;
    ``cs`` compresses with ``phi`` first. Errors carry the failing stage in
    their ``stage`` attribute.
    """
    with _stage("validate"):
        _resolve_lags(variant, geometry)
        if variant == CS:
            _check_phi(phi, M, geometry)
    with _stage("compress"):
        data = compress(phi, snapshots) if variant == CS else snapshots
    with _stage("covariance"):
        R = sample_covariance(data)
    return doa_from_covariance(R.data, M, variant, geometry, phi)


def match_to_truth(estimates: Sequence[float], truth: Sequence[float]) -> np.ndarray:
    """Signed errors ``estimate - truth`` in truth order.

    The assignment minimises the total squared error over all permutations.
    """
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise DomainError(f"{est.size} estimates for {tru.size} true angles")
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(len(tru))):
        err = est[list(perm)] - tru
        cost = float(err @ err)
        if cost < best_cost:
            best, best_cost = err, cost
    return best
