import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from thinend.geometry import GraphCurve, build_subregion, build_thin_end_2d, mesh_subregion

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_setup(eps, amp=0.0, h_ratio=8, L=2.0):
    curve = GraphCurve.sine(amp * eps, L) if amp else GraphCurve.flat(L)
    end = build_thin_end_2d(curve, eps)
    sub = build_subregion(end)
    return end, sub, mesh_subregion(sub, eps / h_ratio)


@pytest.fixture
def flat_setup():
    return make_setup(0.1)


@pytest.fixture
def curved_setup():
    return make_setup(0.1, amp=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
