import numpy as np
import pytest

from pinchisac.experiments import case_config
from pinchisac.geometry import RfConstants, SystemGeometry
from pinchisac.sensing import DetectionSpec

P_MAX = 10.0
SIGMA_U2 = 1e-9


@pytest.fixture
def rf():
    return RfConstants()


@pytest.fixture
def spec():
    return DetectionSpec()


def case_geometry(case):
    cfg = case_config(case)
    return cfg.geometry(cfg.user, cfg.target)


@pytest.fixture
def case1():
    return case_geometry(1)


@pytest.fixture
def default_geom():
    return SystemGeometry.default(user=(4.0, 8.0), target=(-4.0, 12.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = []


@pytest.fixture
def report():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
