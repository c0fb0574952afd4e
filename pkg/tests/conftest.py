import pytest

from featcode import rangecoder


@pytest.fixture(scope="session", autouse=True)
def _warm_jit_kernels():
    # pay the one-time JIT compilation cost before any timed test runs
    rangecoder.warm_kernels()
