"""Gyrocompassing with MEMS gyros on a hovering vehicle under rotational disturbances."""

from .frames import BodyRates, EulerAngles, GeoConfig, gyrocompass_full, gyrocompass_leveled
from .gyro import GyroErrorModel, RateSeries

__version__ = "0.1.0"

__all__ = [
    "BodyRates",
    "EulerAngles",
    "GeoConfig",
    "GyroErrorModel",
    "RateSeries",
    "gyrocompass_full",
    "gyrocompass_leveled",
]
