import numpy as np
import pytest

from btlab.geometry import make_model


@pytest.fixture(scope="session")
def round_sphere():
    return make_model("round_sphere")


@pytest.fixture(scope="session")
def deformed():
    return make_model("deformed_sphere", epsilon=0.1)


@pytest.fixture(scope="session")
def torus():
    return make_model("torus", tau=1j)


@pytest.fixture(scope="session")
def skew_torus():
    return make_model("torus", tau=0.3 + 0.9j)


@pytest.fixture(scope="session")
def chart_points():
    # avoid the poles of the coordinate formulas and stay well inside the chart
    r = np.array([0.0, 0.3, 0.7, 1.0, 1.6, 2.5])
    th = np.array([0.0, 1.1, 2.3, 3.9, 5.0, 0.4])
    return r * np.exp(1j * th)
