import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from berglab import domains as D
from berglab import kernel as ker

settings.register_profile("berglab", derandomize=True, deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("berglab")


@pytest.fixture(scope="session")
def disk_model():
    return ker.build_kernel(D.disk(), 12)


@pytest.fixture(scope="session")
def ball_model():
    return ker.build_kernel(D.ball(2), 10)


@pytest.fixture(scope="session")
def bidisk_model():
    return ker.build_kernel(D.polydisk(2), 10)


@pytest.fixture(scope="session")
def ball_qmc():
    return ker.build_kernel(D.ball(2).as_generic(), 10, 2_000_000, 0)


PI = math.pi


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
