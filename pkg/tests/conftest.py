import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ppb import theory

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line; printed in the terminal summary."""

    def record(number, ok, detail):
        _ACCEPTANCE.append((number, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def default_waveform():
    return theory.doppler_averaged_g2(theory.default_tau_grid())


def poisson_times(rng, rate, duration):
    n = rng.poisson(rate * duration)
    return np.sort(rng.integers(0, int(duration * 1e12), n))
