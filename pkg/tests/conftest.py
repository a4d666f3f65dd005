import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from csdoa.array_model import ArrayGeometry, steering_matrix  # noqa: E402
from csdoa.compression import draw_measurement_matrix  # noqa: E402
from csdoa.spectral import exact_covariance  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def example1_model():
    """N=7 ULA, sources at 20 and -50 degrees, unit powers, 15 dB."""
    geometry = ArrayGeometry.ula(7)
    angles = (20.0, -50.0)
    sigma2 = 10 ** (-15 / 10)
    A = steering_matrix(geometry, angles)
    R = exact_covariance(A, [1.0, 1.0], sigma2)
    phi = draw_measurement_matrix(3, 7, seed=11, M=2)
    return geometry, angles, sigma2, A, R, phi


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion, printed after the run."""

    def record(criterion, passed, detail):
        _ACCEPTANCE.append((criterion, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(
            f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        )
