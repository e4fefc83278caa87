import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hpd(rng, M, shift=0.1):
    """Random Hermitian positive-definite matrix."""
    X = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    return X @ X.conj().T + shift * np.eye(M)


def random_herm(rng, M):
    X = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    return 0.5 * (X + X.conj().T)


ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail):
    """Store one PASS/FAIL line for the acceptance summary and echo it."""
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
