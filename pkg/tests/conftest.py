import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("finshap", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("finshap")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import _report

    if _report.LINES:
        terminalreporter.section("acceptance")
        for n in sorted(_report.LINES):
            terminalreporter.write_line(_report.LINES[n])
