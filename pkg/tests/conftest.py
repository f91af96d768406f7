import numpy as np
import pytest

from stsli import _accel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def numpy_backend():
    """Run the test body with the pure numpy kernels, restoring the previous backend."""
    prev = _accel.get_backend()
    _accel.set_backend("numpy")
    yield
    if prev != "numpy":
        _accel.set_backend(prev)
