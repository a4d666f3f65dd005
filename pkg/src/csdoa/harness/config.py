"""Experiment configuration and its ``key = value`` file format.

Files have ``[scenario]``, ``[geometry]`` and ``[experiment]`` sections;
lists are comma separated. Keys missing from a file keep the values of the
preset the file is layered on.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Tuple

from ..array_model import ArrayGeometry, SourceScenario
from ..compression import PHI_MODES, ROW_ORTHONORMAL, validate_m
from ..deviation import SIGMA_ESTIMATED, SIGMA_KNOWN
from ..errors import BoundError, DomainError
from ..rootmusic import CLASSIC, CS, VARIANTS

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PRESETS",
    "preset",
    "parse_config",
    "serialize_config",
    "load_config",
]


class ConfigError(DomainError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: SourceScenario
    geometry: ArrayGeometry
    m: int = 3
    phi_mode: str = ROW_ORTHONORMAL
    snr_grid_db: Tuple[float, ...] = (15.0,)
    snapshot_grid: Tuple[int, ...] = (1000,)
    trials: int = 200
    master_seed: int = 42
    variants: Tuple[str, ...] = VARIANTS
    fix_phi: bool = False
    sigma_mode: str = SIGMA_KNOWN
    outlier_threshold_deg: float = 5.0
    lemma_snapshots: int = 5
    lemma_dimension: int = 3
    timing_repeats: int = 200

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "snapshot_grid", tuple(int(t) for t in self.snapshot_grid))
        object.__setattr__(self, "variants", tuple(self.variants))
        if not self.snr_grid_db or not self.snapshot_grid:
            raise ConfigError("snr_grid_db and snapshot_grid must be non-empty")
        if any(t < 1 for t in self.snapshot_grid):
            raise ConfigError("snapshot counts must be >= 1")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not self.variants or any(v not in VARIANTS for v in self.variants):
            raise ConfigError(f"variants must be a non-empty subset of {VARIANTS}")
        if len(set(self.variants)) != len(self.variants):
            raise ConfigError("duplicate variants")
        if self.phi_mode not in PHI_MODES:
            raise ConfigError(f"phi_mode must be one of {PHI_MODES}")
        if self.sigma_mode not in (SIGMA_KNOWN, SIGMA_ESTIMATED):
            raise ConfigError(f"sigma_mode must be {SIGMA_KNOWN!r} or {SIGMA_ESTIMATED!r}")
        if self.lemma_snapshots < 1 or self.lemma_dimension < 1 or self.timing_repeats < 1:
            raise ConfigError("lemma and timing parameters must be positive")
        # the scenario tracks the first grid point
        scenario = self.scenario.with_snapshots(self.snapshot_grid[0]).with_snr(
            self.snr_grid_db[0]
        )
        object.__setattr__(self, "scenario", scenario)
        scenario.check_against(self.geometry)
        if CLASSIC in self.variants and not self.geometry.is_uniform:
            raise ConfigError("the classic variant needs a uniform linear array")
        if CS in self.variants and self.geometry.grid_lags() is None:
            raise ConfigError("sensor positions must lie on the spacing_ratio grid")
        if CS in self.variants:
            check = validate_m(scenario.num_sources, self.geometry.num_sensors, self.m)
            if not check.accepted:
                raise BoundError(check.reason, check.message)

    @property
    def num_sources(self) -> int:
        return self.scenario.num_sources


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _words(text: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("true", "yes", "1", "on"):
        return True
    if value in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_EXPERIMENT_KEYS = {
    "m": int,
    "phi_mode": str.strip,
    "snr_grid_db": _floats,
    "snapshot_grid": _ints,
    "trials": int,
    "master_seed": int,
    "variants": _words,
    "fix_phi": _bool,
    "sigma_mode": str.strip,
    "outlier_threshold_deg": float,
    "lemma_snapshots": int,
    "lemma_dimension": int,
    "timing_repeats": int,
}


def parse_config(text: str, base: "ExperimentConfig | None" = None) -> ExperimentConfig:
    """Parse configuration text, layering it over ``base`` (default: example1)."""
    base = base or preset("example1")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    known = {"scenario", "geometry", "experiment"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    try:
        sc = cp["scenario"] if cp.has_section("scenario") else {}
        angles = _floats(sc["angles_deg"]) if "angles_deg" in sc else base.scenario.angles_deg
        if "powers" in sc:
            powers = _floats(sc["powers"])
        elif "angles_deg" in sc:
            powers = None
        else:
            powers = base.scenario.powers
        extra = set(sc) - {"angles_deg", "powers"}

        geo = cp["geometry"] if cp.has_section("geometry") else {}
        n = int(geo["num_sensors"]) if "num_sensors" in geo else base.geometry.num_sensors
        d = float(geo["spacing_ratio"]) if "spacing_ratio" in geo else base.geometry.spacing_ratio
        if "positions" in geo:
            positions = _floats(geo["positions"]) if geo["positions"].strip() else None
        elif "num_sensors" in geo or "spacing_ratio" in geo:
            positions = None
        else:
            positions = base.geometry.positions
        extra |= set(geo) - {"num_sensors", "spacing_ratio", "positions"}

        ex = cp["experiment"] if cp.has_section("experiment") else {}
        extra |= set(ex) - set(_EXPERIMENT_KEYS)
        if extra:
            raise ConfigError(f"unknown keys: {sorted(extra)}")
        updates = {key: conv(ex[key]) for key, conv in _EXPERIMENT_KEYS.items() if key in ex}
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration value: {exc}") from exc
    geometry = ArrayGeometry(n, positions, d)
    scenario = SourceScenario(angles, powers)
    return replace(base, scenario=scenario, geometry=geometry, **updates)


def _join(values) -> str:
    return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in values)


def serialize_config(config: ExperimentConfig) -> str:
    """Render a configuration; ``parse_config`` inverts it exactly."""
    lines = [
        "[scenario]",
        f"angles_deg = {_join(config.scenario.angles_deg)}",
        f"powers = {_join(config.scenario.powers)}",
        "",
        "[geometry]",
        f"num_sensors = {config.geometry.num_sensors}",
        f"spacing_ratio = {config.geometry.spacing_ratio!r}",
        f"positions = {_join(config.geometry.positions)}",
        "",
        "[experiment]",
    ]
    for key in _EXPERIMENT_KEYS:
        value = getattr(config, key)
        if isinstance(value, tuple):
            text = _join(value)
        elif isinstance(value, bool):
            text = str(value).lower()
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def load_config(path, base: "ExperimentConfig | None" = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    return parse_config(text, base)


def _example1() -> ExperimentConfig:
    return ExperimentConfig(
        scenario=SourceScenario((20.0, -50.0)),
        geometry=ArrayGeometry.ula(7),
        m=3,
        snr_grid_db=(15.0,),
        snapshot_grid=(1000,),
        trials=200,
    )


def _rmse_sweep() -> ExperimentConfig:
    return replace(_example1(), snr_grid_db=(0.0, 5.0, 10.0, 15.0, 20.0))


def _deviation_sweep() -> ExperimentConfig:
    return ExperimentConfig(
        scenario=SourceScenario((20.0, -50.0)),
        geometry=ArrayGeometry.ula(10),
        m=3,
        snr_grid_db=(-10.0, 0.0, 10.0, 20.0, 30.0),
        snapshot_grid=(10, 50, 100),
        trials=500,
    )


def _lemma_check() -> ExperimentConfig:
    return replace(_example1(), trials=100_000)


def _timing() -> ExperimentConfig:
    return ExperimentConfig(
        scenario=SourceScenario((20.0, -50.0)),
        geometry=ArrayGeometry.ula(64),
        m=3,
        snr_grid_db=(15.0,),
        snapshot_grid=(1000,),
        trials=1,
    )


PRESETS = {
    "example1": _example1,
    "rmse-sweep": _rmse_sweep,
    "deviation-sweep": _deviation_sweep,
    "lemma-check": _lemma_check,
    "timing": _timing,
}


def preset(name: str) -> ExperimentConfig:
    """Default configuration of a subcommand."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}") from None
