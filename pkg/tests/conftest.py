import numpy as np
import pytest

from besovtrace.fields import BesovParams
from besovtrace.wavelets import build_G, daubechies


@pytest.fixture(scope="session")
def db8():
    return daubechies(8, 12)


@pytest.fixture(scope="session")
def db4():
    return daubechies(4, 10)


@pytest.fixture(scope="session")
def G8(db8):
    return build_G(db8, 1)


@pytest.fixture
def params2d():
    return BesovParams(2.0, 2.0, 2.0, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
