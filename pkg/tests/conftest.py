import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from onebitcs import kernels

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BACKENDS = kernels.backends()


@pytest.fixture(params=sorted(BACKENDS), scope="module")
def backend(request):
    return BACKENDS[request.param]


@pytest.fixture
def force_backend(monkeypatch, backend):
    """Route the package-level kernel aliases through ``backend``."""
    for name in ("project_l1_ball", "project_l2_ball", "project_ellipsoid", "dykstra_l1_l2",
                 "dykstra_l1_ellipsoid", "soft_threshold_level", "hamming", "pair_disagreements"):
        monkeypatch.setattr(kernels, name, getattr(backend, name))
    return backend


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    lines = [v for key in ("passed", "failed")
             for rep in terminalreporter.stats.get(key, [])
             for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
