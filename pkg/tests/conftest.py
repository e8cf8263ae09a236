import numpy as np
import pytest

from prbeam.array import ArrayGeometry, dft_codebook

_ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def geometry():
    return ArrayGeometry.ula(16, 0.011)


@pytest.fixture
def codebook16(geometry):
    return dft_codebook(geometry, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
