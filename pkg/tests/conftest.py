import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_LOG_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LOG_KEY] = []


@pytest.fixture
def acceptance_log(request):
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""
    log = request.config.stash[_LOG_KEY]

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        log.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_LOG_KEY, [])
    if log:
        terminalreporter.section("acceptance criteria")
        for line in sorted(log, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
