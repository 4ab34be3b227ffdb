import pytest

from dampedwave import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT-compile (or load from cache) every kernel before timed tests run.
    _kernels.warm_up()
