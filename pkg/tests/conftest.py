"""Test fixtures used throughout complex-charts tests."""
import numpy as np
import pytest

from complex_charts.almost_complex import (
    canonical_matrix,
    pullback_structure,
    validate,
)
from complex_charts.chart import TensorField, make_grid
from complex_charts.specs import sample_modes


@pytest.fixture(scope="session")
def chart_1d():
    """One complex dimension on an 8 x 8 grid."""
    return make_grid(1, 8)


@pytest.fixture(scope="session")
def chart_2d():
    """Two complex dimensions on an 8^4 grid."""
    return make_grid(2, 8)


def two_mode_displacement(chart):
    """Fixed smooth periodic displacement field v with two Fourier modes."""
    D = chart.dim
    v = np.zeros((D,) + chart.shape)
    k1 = [0] * D
    k1[-1] = 1
    k2 = [0] * D
    k2[0] = 1
    v[0] = sample_modes(chart, [{"k": k1, "cos": 0.0, "sin": 1.0}])
    v[1 % D] += sample_modes(chart, [{"k": k2, "cos": 0.5, "sin": 0.0}])
    return v


@pytest.fixture(scope="session")
def pullback_1d(chart_1d):
    """Pulled back structure with scale 0.05 on the d = 1 chart."""
    return pullback_structure(chart_1d, two_mode_displacement(chart_1d), 0.05)


@pytest.fixture(scope="session")
def pullback_2d(chart_2d):
    """Pulled back structure with scale 0.05 on the d = 2 chart."""
    return pullback_structure(chart_2d, two_mode_displacement(chart_2d), 0.05)


@pytest.fixture(scope="session")
def pullback_acs_2d(pullback_2d):
    """Validated structure with metric from `pullback_2d`."""
    return validate(pullback_2d.I, pullback_2d.g)


@pytest.fixture(scope="session")
def twisted_2d(chart_2d):
    """Non-integrable structure P I_0 P^-1 with P = 1 + s sin(x1) e_3 e_1^T."""
    x1 = chart_2d.coordinates()[0]
    E = np.zeros((4, 4))
    E[2, 0] = 1.0
    s = 0.05 * np.sin(x1)[..., None, None]
    P = np.eye(4) + s * E
    P_inv = np.eye(4) - s * E
    A = P @ canonical_matrix(2) @ P_inv
    return TensorField.from_pointwise(chart_2d, A, "lu")


@pytest.fixture(scope="session")
def displacement_1d(chart_1d):
    """The displacement behind `pullback_1d`."""
    return two_mode_displacement(chart_1d)


@pytest.fixture(scope="session")
def chart_2d_fine():
    """Two complex dimensions on a 16^4 grid."""
    return make_grid(2, 16)


@pytest.fixture(scope="session")
def displacement_2d_fine(chart_2d_fine):
    """The two-mode displacement on `chart_2d_fine`."""
    return two_mode_displacement(chart_2d_fine)
