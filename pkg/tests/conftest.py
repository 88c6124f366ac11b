import math
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from app.spec_schema import SimConfig


@pytest.fixture
def temp_workspace():
    """Create temporary workspace with input and output directories"""
    temp_dir = tempfile.mkdtemp(prefix="fusion_test_")

    for directory in ["datasets", "results", "configs", "data/catalog"]:
        Path(temp_dir, directory).mkdir(parents=True, exist_ok=True)

    # Three-sample IMU log with unnormalised accelerometer and magnetometer rows
    sample_log = pd.DataFrame({
        "t": [0.0, 0.1, 0.2],
        "gx": [0.01, 0.02, 0.0],
        "gy": [0.0, -0.01, 0.01],
        "gz": [0.005, 0.0, -0.005],
        "ax": [0.1, 0.0, -0.1],
        "ay": [0.0, 0.2, 0.0],
        "az": [-9.81, -9.79, -9.80],
        "mx": [22.0, 21.5, 22.3],
        "my": [1.0, 0.5, -0.5],
        "mz": [40.0, 40.5, 39.8],
    })
    sample_log.to_csv(Path(temp_dir, "datasets", "imu_sample.csv"), index=False)

    yield temp_dir

    shutil.rmtree(temp_dir, ignore_errors=True)


@pytest.fixture
def sample_csv(temp_workspace):
    return Path(temp_workspace, "datasets", "imu_sample.csv")


@pytest.fixture
def small_sim_config():
    """One short cycle of the rotation trajectory with the default noise levels"""
    return SimConfig(n_stationary=20, n_per_rotation=40, n_cycles=1, seed=7)


@pytest.fixture
def zero_noise_config():
    return SimConfig(sigma_omega=0.0, sigma_acc=0.0, sigma_mag=0.0, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def random_quaternions(rng):
    """Twenty random unit quaternions"""
    q = rng.standard_normal((20, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


@pytest.fixture
def dip():
    return math.radians(60.0)
