import pytest

from closurefdr import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # jit-compile the hot kernels once so per-test timings are stable
    kernels.warm_up()
