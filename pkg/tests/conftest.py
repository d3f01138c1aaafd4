import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slpmld import build_constellation, map_bits, sample_channel

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture
def qam16():
    return build_constellation(16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_instance(rng, K, N_R, N_T, L, order=16):
    """Channel and symbol vector drawn from ``rng``."""
    c = build_constellation(order)
    H = sample_channel(K, N_R, N_T, rng)
    bits = rng.integers(0, 2, K * L * c.bits_per_symbol)
    return H, map_bits(bits, c), c
