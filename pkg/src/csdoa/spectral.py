"""Covariance estimation, Hermitian eigendecomposition and subspace splits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np

from .array_model import SnapshotMatrix
from .errors import DomainError

__all__ = [
    "CovarianceMatrix",
    "Eigendecomposition",
    "SubspaceSplit",
    "sample_covariance",
    "exact_covariance",
    "eigendecompose_hermitian",
    "split_subspaces",
    "noise_projector",
]

SAMPLE = "sample"
EXACT = "exact"

# relative tolerances
HERMITIAN_TOL = 1e-10
TIE_TOL = 1e-10


@dataclass(frozen=True)
class CovarianceMatrix:
    """Hermitian ``k x k`` covariance, either sampled or exact."""

    data: np.ndarray = field(repr=False)
    kind: str = SAMPLE

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DomainError(f"covariance must be square, got shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dimension(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __sub__(self, other: "CovarianceMatrix") -> np.ndarray:
        return self.data - np.asarray(other)


MatrixLike = Union[CovarianceMatrix, np.ndarray]


def _hermitize(R: np.ndarray) -> np.ndarray:
    return (R + R.conj().T) / 2


def sample_covariance(snapshots: Union[SnapshotMatrix, np.ndarray]) -> CovarianceMatrix:
    """``(1/T) X X^H``, symmetrised to be exactly Hermitian."""
    X = snapshots.data if isinstance(snapshots, SnapshotMatrix) else np.asarray(snapshots)
    T = X.shape[1]
    if T < 1:
        raise DomainError("need at least one snapshot")
    return CovarianceMatrix(_hermitize(X @ X.conj().T / T), SAMPLE)


def exact_covariance(
    A: np.ndarray, powers: Sequence[float], noise_variance: float
) -> CovarianceMatrix:
    """Model covariance ``A diag(powers) A^H + sigma^2 I``."""
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A[:, None]
    p = np.asarray(powers, dtype=float).reshape(-1)
    if p.size != A.shape[1]:
        raise DomainError(f"{p.size} powers given for {A.shape[1]} steering columns")
    if np.any(p < 0) or noise_variance < 0:
        raise DomainError("powers and noise variance must be non-negative")
    R = (A * p) @ A.conj().T + noise_variance * np.eye(A.shape[0])
    return CovarianceMatrix(_hermitize(R), EXACT)


class Eigendecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _normalize_phase(V: np.ndarray) -> np.ndarray:
    # largest-magnitude component made real-positive
    idx = np.argmax(np.abs(V), axis=0)
    pivot = V[idx, np.arange(V.shape[1])]
    return V * (np.abs(pivot) / pivot)


def eigendecompose_hermitian(R: MatrixLike) -> Eigendecomposition:
    """Eigenpairs of a Hermitian matrix, eigenvalues ascending.

    Each eigenvector is scaled so its largest-magnitude entry is real and
    positive. Within a group of tied eigenvalues, columns are ordered by the
    real parts of their entries, lexicographically descending, so the
    output does not depend on LAPACK's ordering of a degenerate eigenspace.

    Raises
    ------
    DomainError
        If ``R`` is not Hermitian to a relative tolerance of ``1e-10``.
    """
    R = np.asarray(R, dtype=complex)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {R.shape}")
    scale = max(np.linalg.norm(R), 1.0)
    if np.linalg.norm(R - R.conj().T) > HERMITIAN_TOL * scale:
        raise DomainError("matrix is not Hermitian")
    w, V = np.linalg.eigh(_hermitize(R))
    V = _normalize_phase(V)

    tol = TIE_TOL * max(np.max(np.abs(w)), 1e-300)
    start = 0
    order = []
    k = len(w)
    while start < k:
        stop = start + 1
        while stop < k and w[stop] - w[stop - 1] <= tol:
            stop += 1
        group = list(range(start, stop))
        if len(group) > 1:
            keys = {j: tuple(np.round(V[:, j].real, 12)) for j in group}
            group.sort(key=lambda j: keys[j], reverse=True)
        order.extend(group)
        start = stop
    return Eigendecomposition(w[order], V[:, order])


@dataclass(frozen=True)
class SubspaceSplit:
    """Ascending eigenpairs partitioned into noise ``Q`` and signal ``P``."""

    eigenvalues: np.ndarray = field(repr=False)
    noise_basis: np.ndarray = field(repr=False)
    signal_basis: np.ndarray = field(repr=False)
    noise_floor_estimate: float

    @property
    def dimension(self) -> int:
        return self.noise_basis.shape[0]

    @property
    def num_sources(self) -> int:
        return self.signal_basis.shape[1]

    @property
    def signal_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[-self.num_sources:]


def split_subspaces(decomposition: Eigendecomposition, M: int) -> SubspaceSplit:
    """Take the first ``k - M`` eigenvectors as noise, the last ``M`` as signal."""
    w, V = decomposition
    k = len(w)
    if not 0 <= M < k:
        raise DomainError(f"need 0 <= M < k for a noise subspace, got M={M}, k={k}")
    return SubspaceSplit(
        eigenvalues=w,
        noise_basis=V[:, : k - M],
        signal_basis=V[:, k - M:],
        noise_floor_estimate=float(np.mean(w[: k - M])),
    )


def noise_projector(split: SubspaceSplit) -> np.ndarray:
    """``Gamma_N = Q Q^H``."""
    Q = split.noise_basis
    return _hermitize(Q @ Q.conj().T)
