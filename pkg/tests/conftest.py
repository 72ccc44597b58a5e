import numpy as np
import pytest

from hypercpf import _kernels
from hypercpf.hyperstate import make_input_state
from hypercpf.verification import random_amplitudes

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def random_input(rng):
    amps = random_amplitudes(rng)
    return amps, make_input_state(amps["alpha"], amps["beta"], amps["lambda"], amps["varpi"])


@pytest.fixture(params=["numpy", "numba"])
def kernel_backend(request):
    if request.param == "numba" and _kernels.NUMBA is None:
        pytest.skip("numba unavailable")
    previous = _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(previous)
