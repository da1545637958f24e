import numpy as np
import pytest

from fluidport import AntennaConfig, FadingParams, SystemConfig, factorize_correlation
from fluidport.channel import build_correlation_matrix


@pytest.fixture(scope="session")
def small_antenna():
    return AntennaConfig(n_ports=20, aperture=2.0)


@pytest.fixture(scope="session")
def small_factor(small_antenna):
    return factorize_correlation(build_correlation_matrix(small_antenna))


@pytest.fixture(scope="session")
def default_system():
    return SystemConfig()


@pytest.fixture(scope="session")
def rayleigh_params():
    return FadingParams(alpha=2.0, mu=1)


def simpson_j0(x, n=200001):
    """Independent Bessel oracle: J0(x) = (1/pi) * int_0^pi cos(x sin t) dt."""
    t = np.linspace(0.0, np.pi, n)
    h = t[1] - t[0]
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((h / 3.0) * np.sum(w * np.cos(x * np.sin(t))) / np.pi)
