import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from miurakdv import catalog

settings.register_profile("pkg", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pkg")

ACCEPTANCE_LINES = []


def catalog_profiles():
    return {
        "delta": catalog("delta", c=1.0),
        "smooth_bump": catalog("smooth_bump", a=2.0, amplitude=0.5),
        "positive_box": catalog("positive_box", b=1.0, a=1.0),
        "constant_r": catalog("constant_r", kappa=1.0),
        "rough_random": catalog("rough_random", seed=7, L=8),
        "zero": catalog("zero"),
    }


@pytest.fixture(scope="session")
def profiles():
    return catalog_profiles()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
