import numpy as np
import pytest

from kdvdg import Mesh, build_operators


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_mesh(rng, N, a=0.0, b=1.0):
    inner = np.sort(rng.uniform(a, b, N - 1))
    return Mesh(np.r_[a, inner, b])


def random_ops(rng, N=4, k=2):
    return build_operators(random_mesh(rng, N), k)


_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
