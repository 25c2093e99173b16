import warnings

import pytest

from mems_gyrocompass import dynamics as dyn
from mems_gyrocompass.config import RunConfig

TINY = {
    "seed": 3,
    "augment": {"heading_count": 8, "per_heading_count": 10, "window_length": 600},
    "train": {"epochs": 5, "segments": 20},
    "bench": {"gammas": [0.0, 1.0], "averaging_times": [0.1, 1.0], "snr_duration": 20.0},
}


@pytest.fixture
def tiny_config(tmp_path):
    """Small, fast run config writing into a temporary directory."""
    data = {**TINY, "output": str(tmp_path / "out")}
    return RunConfig.from_mapping(data)


@pytest.fixture(autouse=True)
def _quiet_small_angle():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", dyn.SmallAngleWarning)
        yield
