import numpy as np
import pytest

from icansim.config import load_config
from icansim.constellation import ShellConfig, build_constellation, propagate_arrays


@pytest.fixture(scope="session")
def reference():
    return load_config()


@pytest.fixture(scope="session")
def small_cfg(reference):
    return reference.replace(ue_count=24, num_snapshots=3)


@pytest.fixture(scope="session")
def shell_snapshot():
    return propagate_arrays(build_constellation(ShellConfig()), 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
