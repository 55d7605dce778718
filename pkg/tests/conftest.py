import numpy as np
import pytest

from spinfreeze.modular_family import BaseParams
from spinfreeze.r_matrices import ModelParams

ACCEPTANCE_LINES = []

BASE = BaseParams(0.27 + 0.05j, 0.6 + 0.1j, 0.15 + 1.2j, (0.31 + 0.12j, -0.17 + 0.05j))
TAU = 0.15 + 1.2j
ETA = 0.27 + 0.05j
A_DYN = (0.31 + 0.12j, -0.17 + 0.05j)


def model(N=3, r=2, face=False, **kw):
    return ModelParams(kw.pop("eta", ETA), kw.pop("epsilon", 0.6 + 0.1j), kw.pop("tau", TAU), r=r, N=N, dyn_a=A_DYN if face else (), **kw)


def spaced_points(rng, N, jitter=0.05):
    return np.arange(N) / N + rng.uniform(-jitter, jitter, N) + 1j * rng.uniform(-jitter, jitter, N)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


@pytest.fixture(params=["vertex", "face"])
def kind(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
