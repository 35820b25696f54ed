import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def phase_at(x: np.ndarray, freq_hz: float, fs: float) -> float:
    """Phase of the sin(2 pi f k / fs + phi) component of x (least squares)."""
    k = np.arange(len(x))
    a = 2 * np.pi * freq_hz * k / fs
    basis = np.stack([np.sin(a), np.cos(a)], axis=1)
    (s, c), *_ = np.linalg.lstsq(basis, x, rcond=None)
    return float(np.arctan2(c, s))


def wrap(angle):
    return (np.asarray(angle) + np.pi) % (2 * np.pi) - np.pi


# acceptance criteria append (number, passed, detail); printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
