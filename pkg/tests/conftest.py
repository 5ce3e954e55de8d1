import math

import numpy as np
import pytest

from geoxrt import ConformalBump, Euclidean
from geoxrt.geometry import ConformalMetric

SEED = 20240611


def unit_speed_defect(metric, path):
    return float(np.max(np.abs(metric.norm2(path.x, path.v) - 1)))


class SphericalCap(ConformalMetric):
    """Unit sphere in scaled stereographic coordinates: the unit disk is a polar cap.

    ``g = 4 / (c^2 (1 + |x|^2 / c^2)^2) I``.  The cap has angular radius
    ``theta0 = 2 atan(1 / c)``, curvature 1 and boundary geodesic curvature
    ``cot(theta0)``; everything about it is known in closed form.
    """

    kind = "test-sphere"

    def __init__(self, c=2.0):
        self.c = float(c)
        self.theta0 = 2 * math.atan(1 / self.c)

    def phi(self, x):
        r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
        return math.log(2 / self.c) - np.log1p(r2 / self.c ** 2)

    def grad_phi(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)[..., None]
        return -2 * x / (self.c ** 2 + r2)

    def laplacian_phi(self, x):
        r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
        c2 = self.c ** 2
        return -4 * c2 / (c2 + r2) ** 2

    def chord(self, alpha):
        """Length of the great-circle arc entering the cap at incidence ``alpha``."""
        d = np.arcsin(np.sin(self.theta0) * np.sin(alpha))
        return 2 * np.arccos(np.cos(self.theta0) / np.cos(d))

    def config(self):
        return {"kind": self.kind, "c": self.c}


@pytest.fixture
def euclid():
    return Euclidean()


@pytest.fixture
def bump():
    return ConformalBump(0.05, (0.1, -0.2), 0.5)


@pytest.fixture
def sphere():
    return SphericalCap(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


# acceptance lines, printed once at the end of the session

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[_ACCEPTANCE]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
