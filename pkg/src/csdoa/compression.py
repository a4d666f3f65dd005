"""Measurement matrices and the compressive map ``y = Phi x``."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .array_model import SnapshotMatrix, make_rng
from .errors import BoundError, DomainError

__all__ = [
    "RAW_GAUSSIAN",
    "ROW_ORTHONORMAL",
    "IDENTITY",
    "NO_NOISE_EIGENVECTOR",
    "NO_COMPRESSION",
    "MValidation",
    "MeasurementMatrix",
    "validate_m",
    "draw_measurement_matrix",
    "compress",
]

RAW_GAUSSIAN = "raw-gaussian"
ROW_ORTHONORMAL = "row-orthonormal"
IDENTITY = "identity"
PHI_MODES = (RAW_GAUSSIAN, ROW_ORTHONORMAL)

NO_NOISE_EIGENVECTOR = "no-noise-eigenvector"
NO_COMPRESSION = "no-compression"

CSV_HEADER = "# csdoa-csv v1"


class MValidation(NamedTuple):
    accepted: bool
    reason: Optional[str]
    message: str


def validate_m(M: int, N: int, m: int) -> MValidation:
    """Check the compressed dimension against the open interval ``(M, N)``.

    With ``m <= M`` the compressed covariance has no noise eigenvector to
    build the rooting polynomial from; with ``m >= N`` nothing is compressed.
    """
    if M < 1 or N <= M:
        raise DomainError(f"need 1 <= M < N, got M={M}, N={N}")
    if m <= M:
        return MValidation(
            False,
            NO_NOISE_EIGENVECTOR,
            f"m={m} leaves no noise eigenvector for M={M} sources; need m >= {M + 1}",
        )
    if m >= N:
        return MValidation(
            False, NO_COMPRESSION, f"m={m} does not compress N={N} sensors; need m <= {N - 1}"
        )
    return MValidation(True, None, f"m={m} lies in ({M}, {N})")


@dataclass(frozen=True)
class MeasurementMatrix:
    """A real ``m x N`` compression operator."""

    data: np.ndarray = field(repr=False)
    mode: str = ROW_ORTHONORMAL
    seed: Optional[int] = None

    def __post_init__(self):
        if np.iscomplexobj(self.data):
            raise DomainError("measurement matrix must be real")
        data = np.array(self.data, dtype=float)
        if data.ndim != 2:
            raise DomainError(f"measurement matrix must be 2-D, got shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def num_sensors(self) -> int:
        return self.data.shape[1]

    @classmethod
    def identity(cls, N: int) -> "MeasurementMatrix":
        """``Phi = I_N``; bypasses the bound for classic-equivalence checks."""
        return cls(np.eye(N), IDENTITY, None)

    def to_csv(self, path) -> None:
        """Write row-major with 17 significant digits."""
        lines = [CSV_HEADER, f"# mode={self.mode} seed={self.seed}"]
        lines += [",".join(f"{v:.17g}" for v in row) for row in self.data]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "MeasurementMatrix":
        mode, seed, rows = ROW_ORTHONORMAL, None, []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    if key == "mode":
                        mode = value
                    elif key == "seed" and value not in ("", "None"):
                        seed = int(value)
                continue
            rows.append([float(v) for v in line.split(",")])
        if not rows or len({len(r) for r in rows}) != 1:
            raise DomainError(f"{path}: malformed measurement matrix")
        return cls(np.array(rows), mode, seed)


def draw_measurement_matrix(
    m: int, N: int, mode: str = ROW_ORTHONORMAL, seed: int = 0, M: Optional[int] = None
) -> MeasurementMatrix:
    """Draw a Gaussian measurement matrix.

    Parameters
    ----------
    m, N : int
        Output and input dimensions.
    mode : {"row-orthonormal", "raw-gaussian"}
        ``raw-gaussian`` returns i.i.d. ``N(0, 1/N)`` entries.
        ``row-orthonormal`` orthonormalises the rows of a Gaussian draw so
        that ``Phi Phi^T = I_m`` and compressed white noise stays white with
        the same variance.
    seed : int
        Seed of the ``PCG64`` stream.
    M : int, optional
        Number of sources. When given, ``m`` is checked with
        :func:`validate_m`; otherwise only ``1 <= m < N`` is enforced.

    Raises
    ------
    BoundError
        If ``m`` is outside the admissible range.
    """
    if M is not None:
        check = validate_m(M, N, m)
        if not check.accepted:
            raise BoundError(check.reason, check.message)
    elif not 1 <= m < N:
        raise BoundError(NO_COMPRESSION, f"need 1 <= m < N, got m={m}, N={N}")
    if mode not in PHI_MODES:
        raise DomainError(f"unknown measurement mode {mode!r}; expected one of {PHI_MODES}")
    rng = make_rng(seed)
    G = rng.standard_normal((m, N))
    if mode == RAW_GAUSSIAN:
        return MeasurementMatrix(G / np.sqrt(N), mode, seed)
    Q, R = np.linalg.qr(G.T)
    # sign-fix so the factorisation is unique
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    return MeasurementMatrix(Q.T, mode, seed)


def compress(phi: MeasurementMatrix, snapshots: SnapshotMatrix) -> SnapshotMatrix:
    """Return ``Phi X`` as an ``m``-channel snapshot matrix."""
    if snapshots.channel_count != phi.num_sensors:
        raise DomainError(
            f"snapshots have {snapshots.channel_count} channels but Phi expects "
            f"{phi.num_sensors}"
        )
    return SnapshotMatrix(phi.data @ snapshots.data)
