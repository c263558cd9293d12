import numpy as np
import pytest

from campulse import kernels


@pytest.fixture(scope="session", autouse=True)
def jit_warmup():
    """Compile the scan kernels once so timed tests measure execution."""
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
