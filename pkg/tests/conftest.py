"""Shared fixtures: reference configs at three scales.

full: the default operating point (N=1024, P=120), used where exact
reference numbers matter.  ci: a shrunk grid (N=256, P=24) with the same
relative timing, fast enough for end-to-end loops.  tiny: a short low-carrier
setup for the brute-force time-domain mixer cross-checks.
"""

import numpy as np
import pytest

from isacsim.config import DEFAULT_RAW, derive_config, derive_geometry

CI_RAW = {**DEFAULT_RAW, "num_samples": 256, "chirps_per_frame": 24}
TINY_RAW = {**DEFAULT_RAW, "num_samples": 128, "chirps_per_frame": 8,
            "fc_hz": 4e9, "tx_x": 2, "tx_z": 1, "rx_x": 2, "rx_z": 2,
            "num_rb": 2}


@pytest.fixture(scope="session")
def full_cfg():
    return derive_config({})


@pytest.fixture(scope="session")
def full_geo():
    return derive_geometry({})


@pytest.fixture(scope="session")
def ci_cfg():
    return derive_config(CI_RAW)


@pytest.fixture(scope="session")
def ci_geo():
    return derive_geometry(CI_RAW)


@pytest.fixture(scope="session")
def tiny_cfg():
    return derive_config(TINY_RAW)


@pytest.fixture(scope="session")
def tiny_geo():
    return derive_geometry(TINY_RAW)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
