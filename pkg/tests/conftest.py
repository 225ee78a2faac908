import numpy as np
import pytest

from capdetect._backend import available_backends
from capdetect.sampling import SeededStream

ACCEPTANCE_LINES = []


@pytest.fixture(params=available_backends(), ids=lambda m: m.NAME)
def kern(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


@pytest.fixture
def stream():
    return SeededStream(7, 0)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng, n):
    a = random_complex(rng, n, n)
    return a + a.conj().T


def random_density(rng, n, rank=None):
    a = random_complex(rng, n, rank or n)
    r = a @ a.conj().T
    return r / np.trace(r).real


def random_unit(rng, n):
    v = random_complex(rng, n)
    return v / np.linalg.norm(v)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
