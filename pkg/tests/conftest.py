import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ilwlab.spectral import make_grid, transform

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# coth(1), from the alternating continued fraction / series to 10 digits
COTH1 = 1.3130352854993312


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_real_field(grid, rng, decay=1.0, mean_zero=False):
    n = grid.indices
    c = (rng.standard_normal(grid.n_modes) + 1j * rng.standard_normal(grid.n_modes))
    c *= np.exp(-decay * np.abs(n) / 4)
    f = transform(np.fft.ifft(c).real * grid.n_modes, grid)
    if mean_zero:
        coeffs = f.coeffs.copy()
        coeffs[0] = 0
        f = f.with_coeffs(coeffs)
    return f


@pytest.fixture
def grid64():
    return make_grid(64)


# one line per acceptance criterion, echoed in the terminal summary
CRITERIA_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(CRITERIA_LINES, key=lambda x: x[0]):
        terminalreporter.write_line(line)
