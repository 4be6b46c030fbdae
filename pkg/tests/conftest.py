import numpy as np
import pytest

from homlab.cutoffs import build_cutoffs
from homlab.fields import VelocityHierarchy
from homlab.grid import spectral
from homlab.params import desk_preset


@pytest.fixture(scope="session")
def desk():
    return desk_preset()


@pytest.fixture(scope="session")
def family():
    return build_cutoffs()


@pytest.fixture(scope="session")
def hier1(desk, family):
    """q=1 desk hierarchy on a 256 grid (8 points per wavelength of lambda_1)."""
    return VelocityHierarchy(desk, 256, 1, family=family)


@pytest.fixture(scope="session")
def hier2_coarse(desk, family):
    """q=2 desk hierarchy on a 256 grid (lambda_2 = 77, relaxed resolution rule)."""
    return VelocityHierarchy(desk, 256, 2, family=family, min_ppw=3)


def sin_mode(N, n1=1, n2=0):
    x1, x2 = spectral(N).grid()
    return np.sin(2 * np.pi * (n1 * x1 + n2 * x2))


_ACCEPTANCE = {}


def record(number, ok, detail):
    """Register one acceptance line; printed now and again in the terminal summary."""
    line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    _ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
