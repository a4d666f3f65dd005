"""Array geometry, steering vectors and the narrowband snapshot generator.

Random draws use numpy's ``PCG64`` bit generator seeded with the integer seed
passed in, so a given seed reproduces bit-identical data.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "ArrayGeometry",
    "SourceScenario",
    "SnapshotMatrix",
    "make_rng",
    "steering_vector",
    "steering_matrix",
    "synthesize_snapshots",
]


def make_rng(seed) -> np.random.Generator:
    """Return a ``PCG64`` generator for ``seed`` (int or ``SeedSequence``)."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class ArrayGeometry:
    """A linear array.

    Parameters
    ----------
    num_sensors : int
        Number of sensors ``N``.
    positions : sequence of float, optional
        Sensor coordinates in carrier wavelengths, strictly increasing.
        Defaults to the uniform layout ``n * spacing_ratio``.
    spacing_ratio : float
        Inter-element spacing ``d / lambda`` of the underlying grid.
    """

    num_sensors: int
    positions: Optional[Sequence[float]] = None
    spacing_ratio: float = 0.5

    def __post_init__(self):
        n = int(self.num_sensors)
        if n < 1:
            raise DomainError(f"num_sensors must be >= 1, got {self.num_sensors}")
        if not self.spacing_ratio > 0:
            raise DomainError(f"spacing_ratio must be positive, got {self.spacing_ratio}")
        if self.positions is None:
            pos = tuple(float(k * self.spacing_ratio) for k in range(n))
        else:
            pos = tuple(float(p) for p in self.positions)
            if len(pos) != n:
                raise DomainError(f"expected {n} positions, got {len(pos)}")
            if any(b <= a for a, b in zip(pos, pos[1:])):
                raise DomainError("positions must be strictly increasing")
        object.__setattr__(self, "num_sensors", n)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "spacing_ratio", float(self.spacing_ratio))

    @classmethod
    def ula(cls, num_sensors: int, spacing_ratio: float = 0.5) -> "ArrayGeometry":
        return cls(num_sensors, None, spacing_ratio)

    @property
    def position_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float)

    @property
    def is_uniform(self) -> bool:
        """True when positions are ``positions[0] + n * spacing_ratio``."""
        pos = self.position_array
        ideal = pos[0] + np.arange(self.num_sensors) * self.spacing_ratio
        return bool(np.allclose(pos, ideal, rtol=0.0, atol=1e-12))

    def grid_lags(self) -> np.ndarray | None:
        """Integer grid index of every sensor, or None if off-grid.

        Index ``k_n`` satisfies ``positions[n] - positions[0] = k_n * spacing_ratio``.
        """
        rel = (self.position_array - self.positions[0]) / self.spacing_ratio
        lags = np.rint(rel)
        if not np.allclose(rel, lags, rtol=0.0, atol=1e-9):
            return None
        return lags.astype(int)


@dataclass(frozen=True)
class SourceScenario:
    """Narrowband far-field sources observed by the array.

    ``noise_variance`` may be zero for noise-free studies; ``powers`` defaults
    to unit power for every source.
    """

    angles_deg: Sequence[float]
    powers: Optional[Sequence[float]] = None
    noise_variance: float = 1.0
    num_snapshots: int = 100

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles_deg)
        if not angles:
            raise DomainError("at least one source angle is required")
        for a in angles:
            _check_angle(a)
        if len(set(angles)) != len(angles):
            raise DomainError(f"source angles must be distinct, got {angles}")
        if self.powers is None:
            powers = (1.0,) * len(angles)
        else:
            powers = tuple(float(p) for p in self.powers)
        if len(powers) != len(angles):
            raise DomainError("powers and angles_deg must have the same length")
        if any(not p > 0 for p in powers):
            raise DomainError("source powers must be positive")
        if not self.noise_variance >= 0:
            raise DomainError("noise_variance must be non-negative")
        if int(self.num_snapshots) < 1:
            raise DomainError(f"num_snapshots must be >= 1, got {self.num_snapshots}")
        object.__setattr__(self, "angles_deg", angles)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        object.__setattr__(self, "num_snapshots", int(self.num_snapshots))

    @property
    def num_sources(self) -> int:
        return len(self.angles_deg)

    @property
    def snr_db(self) -> float:
        """Mean per-source SNR in dB (infinite when noise-free)."""
        if self.noise_variance == 0:
            return float("inf")
        return float(10 * np.log10(np.mean(self.powers) / self.noise_variance))

    def with_snr(self, snr_db: float, reference_power: float = 1.0) -> "SourceScenario":
        """Copy with ``noise_variance = reference_power * 10**(-snr_db/10)``."""
        return replace(self, noise_variance=reference_power * 10.0 ** (-snr_db / 10.0))

    def with_snapshots(self, num_snapshots: int) -> "SourceScenario":
        return replace(self, num_snapshots=num_snapshots)

    def electrical_angles(self, spacing_ratio: float) -> np.ndarray:
        """Phase increments ``2 pi (d/lambda) sin(theta_i)``."""
        return 2 * np.pi * spacing_ratio * np.sin(np.deg2rad(self.angles_deg))

    def check_against(self, geometry: ArrayGeometry) -> None:
        if self.num_sources >= geometry.num_sensors:
            raise DomainError(
                f"need fewer sources than sensors (M={self.num_sources}, "
                f"N={geometry.num_sensors})"
            )
        gamma = np.mod(self.electrical_angles(geometry.spacing_ratio), 2 * np.pi)
        gap = np.abs(gamma[:, None] - gamma[None, :])
        gap = np.minimum(gap, 2 * np.pi - gap)
        np.fill_diagonal(gap, np.inf)
        if np.min(gap) < 1e-12:
            raise DomainError("two sources alias to the same electrical angle")


@dataclass(frozen=True)
class SnapshotMatrix:
    """Complex channels-by-snapshots data matrix."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2:
            raise DomainError(f"snapshot data must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DomainError("snapshot data contains non-finite entries")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def channel_count(self) -> int:
        return self.data.shape[0]

    @property
    def snapshot_count(self) -> int:
        return self.data.shape[1]


def _check_angle(angle_deg: float) -> None:
    if not -90.0 < angle_deg < 90.0:
        raise DomainError(f"angle must lie in (-90, 90) degrees, got {angle_deg}")


def steering_vector(geometry: ArrayGeometry, angle_deg: float) -> np.ndarray:
    """Array response ``exp(-j 2 pi p_n sin(theta))`` for one direction."""
    _check_angle(angle_deg)
    phase = 2 * np.pi * geometry.position_array * np.sin(np.deg2rad(angle_deg))
    return np.exp(-1j * phase)


def steering_matrix(geometry: ArrayGeometry, angles_deg: Sequence[float]) -> np.ndarray:
    """Stack steering vectors column-wise into an ``N x M`` matrix."""
    angles = [float(a) for a in angles_deg]
    if len(set(angles)) != len(angles):
        raise DomainError(f"duplicate angles in {angles}")
    for a in angles:
        _check_angle(a)
    theta = np.deg2rad(np.asarray(angles))
    phase = 2 * np.pi * np.outer(geometry.position_array, np.sin(theta))
    return np.exp(-1j * phase).reshape(geometry.num_sensors, len(angles))


def _circular_gaussian(rng: np.random.Generator, shape, variance) -> np.ndarray:
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synthesize_snapshots(
    scenario: SourceScenario, geometry: ArrayGeometry, seed
) -> SnapshotMatrix:
    """Draw ``T`` snapshots ``x(t) = A s(t) + w(t)``.

    Sources are independent circular complex Gaussian with the scenario's
    powers; noise is white circular complex Gaussian with variance
    ``noise_variance`` per channel. Sources are drawn before noise.
    """
    scenario.check_against(geometry)
    rng = make_rng(seed)
    M, N, T = scenario.num_sources, geometry.num_sensors, scenario.num_snapshots
    A = steering_matrix(geometry, scenario.angles_deg)
    s = _circular_gaussian(rng, (M, T), np.asarray(scenario.powers)[:, None])
    w = _circular_gaussian(rng, (N, T), scenario.noise_variance)
    return SnapshotMatrix(A @ s + w)
