"""Compressive-sensing beamformer root-MUSIC and subspace deviation analysis."""

from .array_model import (
    ArrayGeometry,
    SnapshotMatrix,
    SourceScenario,
    steering_matrix,
    steering_vector,
    synthesize_snapshots,
)
from .compression import MeasurementMatrix, compress, draw_measurement_matrix, validate_m
from .deviation import (
    DeviationReport,
    deviation_trial,
    empirical_deviation,
    expected_deviation,
    quadratic_form_deviation,
)
from .errors import (
    AmbiguousRootError,
    BoundError,
    CsdoaError,
    DegenerateError,
    DomainError,
    GeometryError,
    RankError,
)
from .rootmusic import DoaEstimate, estimate_doa
from .spectral import (
    CovarianceMatrix,
    SubspaceSplit,
    eigendecompose_hermitian,
    exact_covariance,
    noise_projector,
    sample_covariance,
    split_subspaces,
)

__version__ = "0.1.0"
