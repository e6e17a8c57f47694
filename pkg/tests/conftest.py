import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nfchannel.geometry import ArrayGeometry, ScattererCluster, Wave

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

S3 = 1.0 / np.sqrt(3.0)
TILTED_NORMAL = np.array([-S3, S3, -S3])


@pytest.fixture
def wave():
    return Wave(0.05)


@pytest.fixture
def small_array():
    return ArrayGeometry.square(4, 0.025)


@pytest.fixture
def reference_cluster():
    return ScattererCluster(100.0 * np.array([S3, S3, S3]), TILTED_NORMAL, 2.0, 0.0, 1.0)


@pytest.fixture(autouse=True)
def _quiet_large_disk_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="disk radius")
        yield


def cluster_at(az_deg, el_deg, dist, radius, concentration=0.0, power=1.0):
    """Disk facing the array from ``dist`` along (azimuth, elevation) in degrees."""
    az, el = np.radians(az_deg), np.radians(el_deg)
    u = np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
    return ScattererCluster(dist * u, -u, radius, concentration, power)


# four scatterers spread over the quadrants, used for estimator comparisons
FOUR_CLUSTERS = (
    cluster_at(40, 30, 40, 2.0),
    cluster_at(-35, 25, 50, 1.5),
    cluster_at(30, -35, 30, 2.0),
    cluster_at(-40, -30, 60, 2.5),
)


def four_cluster_correlation(array, wave):
    from nfchannel.correlation import CorrelationKernel, assemble_matrix

    return assemble_matrix(CorrelationKernel(list(FOUR_CLUSTERS), wave), array).normalized()


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
