import os
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None)
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ks_long_run():
    """The default KS trajectory out to t = 3750, integrated once per session."""
    from fedrom.dynsys import KSConfig, ks_generate

    cfg = KSConfig(t_end=3750.0)
    t0 = time.perf_counter()
    data = ks_generate(cfg, seed=0)
    return cfg, data, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
