"""
Coordinate frames, earth-rate projection and closed-form gyrocompassing.

Conventions
-----------
Navigation frame is north-east-down (NED), body frame is forward-right-down.
Euler angles are the usual z-y-x (yaw, pitch, roll) sequence.

Longitude is not modelled: the earth-rate vector expressed in NED only
depends on latitude,

    w_ie^n = Omega * [cos(lat), 0, -sin(lat)]

which is the standard expansion of the ECEF-to-navigation rotation applied to
[0, 0, Omega]. Heading observability therefore depends on latitude alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: WGS-84 earth rotation rate [rad/s]
EARTH_RATE = 7.292115e-5

#: below this magnitude both arctangent arguments are treated as zero
_DEGENERATE = 1e-15

#: minimum distance from +-pi/2 pitch for the Euler-rate matrix
_GIMBAL_MARGIN = 1e-6


class UnobservableHeadingError(ValueError):
    """Horizontal earth-rate component vanished; heading is undefined."""


class SingularityError(ValueError):
    """Euler-rate mapping evaluated at (or too close to) gimbal lock."""


def wrap_angle(angle):
    """Wrap an angle (scalar or array) into [-pi, pi)."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class EulerAngles:
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("roll", "pitch", "yaw"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


@dataclass(frozen=True)
class BodyRates:
    p: float
    q: float
    r: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.p, self.q, self.r)):
            raise ValueError("body rates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.p, self.q, self.r])

    @classmethod
    def from_array(cls, values) -> "BodyRates":
        p, q, r = (float(v) for v in values)
        return cls(p, q, r)


@dataclass(frozen=True)
class GeoConfig:
    latitude: float = math.radians(32.0)
    earth_rate: float = EARTH_RATE

    def __post_init__(self):
        if not abs(self.latitude) < math.pi / 2:
            raise ValueError("|latitude| must be below pi/2")
        if not self.earth_rate > 0:
            raise ValueError("earth_rate must be positive")

    @property
    def horizontal_rate(self) -> float:
        """Magnitude of the north (horizontal) earth-rate component."""
        return self.earth_rate * math.cos(self.latitude)

    def earth_rate_nav(self) -> np.ndarray:
        return self.earth_rate * np.array(
            [math.cos(self.latitude), 0.0, -math.sin(self.latitude)]
        )


def rotation_inertial_from_body(angles: EulerAngles) -> np.ndarray:
    """Direction cosine matrix taking body-frame vectors to the navigation frame."""
    sr, cr = math.sin(angles.roll), math.cos(angles.roll)
    sp, cp = math.sin(angles.pitch), math.cos(angles.pitch)
    sy, cy = math.sin(angles.yaw), math.cos(angles.yaw)
    return np.array(
        [
            [cp * cy, sr * sp * cy - cr * sy, cr * sp * cy + sr * sy],
            [cp * sy, sr * sp * sy + cr * cy, cr * sp * sy - sr * cy],
            [-sp, sr * cp, cr * cp],
        ]
    )


def rotation_body_from_inertial(angles: EulerAngles) -> np.ndarray:
    """Direction cosine matrix taking navigation-frame vectors into the body frame.

    This is the transpose of :func:`rotation_inertial_from_body`.
    """
    return rotation_inertial_from_body(angles).T


def earth_rate_body(geo: GeoConfig, attitude: EulerAngles) -> BodyRates:
    """Earth rotation rate as sensed by ideal body-aligned gyros."""
    return BodyRates.from_array(rotation_body_from_inertial(attitude) @ geo.earth_rate_nav())


def _heading(sin_arg: float, cos_arg: float) -> float:
    if abs(sin_arg) < _DEGENERATE and abs(cos_arg) < _DEGENERATE:
        raise UnobservableHeadingError(
            "both gyrocompass arguments are below 1e-15; heading is unobservable"
        )
    return wrap_angle(math.atan2(sin_arg, cos_arg))


def gyrocompass_full(rates: BodyRates, roll: float, pitch: float) -> float:
    """Heading from stationary gyro rates given known roll and pitch.

    The body rates are levelled with the known roll/pitch, and the heading is
    the four-quadrant arctangent of the levelled horizontal components.
    """
    p, q, r = rates.p, rates.q, rates.r
    sr, cr = math.sin(roll), math.cos(roll)
    sp, cp = math.sin(pitch), math.cos(pitch)
    s_psi = -q * cr + r * sr
    c_psi = p * cp + q * sr * sp + r * cr * sp
    return _heading(s_psi, c_psi)


def gyrocompass_leveled(rates: BodyRates) -> float:
    """Heading of a levelled platform: ``atan2(-q, p)``."""
    return _heading(-rates.q, rates.p)


def euler_rate_matrix(angles: EulerAngles) -> np.ndarray:
    """Matrix mapping body rates (p, q, r) to Euler angle rates."""
    if abs(angles.pitch) >= math.pi / 2 - _GIMBAL_MARGIN:
        raise SingularityError(f"pitch {angles.pitch!r} too close to +-pi/2")
    sr, cr = math.sin(angles.roll), math.cos(angles.roll)
    cp, tp = math.cos(angles.pitch), math.tan(angles.pitch)
    return np.array(
        [
            [1.0, sr * tp, cr * tp],
            [0.0, cr, -sr],
            [0.0, sr / cp, cr / cp],
        ]
    )
