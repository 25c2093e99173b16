"""
Rotational disturbance model of a hovering, bottom-heavy UUV.

With Coriolis terms neglected and small angles, each rotational axis obeys an
uncoupled second-order ODE

    I * eta'' + D * eta' + G * eta = tau(t),      eta(0) = eta'(0) = 0,

where ``I`` is the principal inertia of a solid cylinder, ``D`` the linear
damping and ``G`` the metacentric restoring stiffness (zero about yaw).

Two independent solution paths are provided: closed-form responses for
impulse, step and sinusoidal forcing (:func:`respond_analytic`) and a
fixed-step RK4 integrator (:func:`respond_numeric`) that serves as its oracle.

The frequency response is the standard form

    H(jw) = (1/I) / ((w0^2 - w^2) + 2j * zeta * w0 * w)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .gyro import RateSeries

AXES = ("roll", "pitch", "yaw")
MODES = ("impulse", "step", "sinusoid")
GRAVITY = 9.81

#: small-angle validity guard [rad]
SMALL_ANGLE_LIMIT = 0.3


class StabilityError(ValueError):
    """Restoring stiffness about roll or pitch is not positive (top-heavy)."""


class UnsupportedRegimeError(ValueError):
    """Critically damped or overdamped roll/pitch axis."""


class SmallAngleWarning(UserWarning):
    """Response left the range where the linearised restoring moment holds."""


def axis_index(axis: str) -> int:
    try:
        return AXES.index(axis)
    except ValueError:
        raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}") from None


@dataclass(frozen=True, eq=False)
class VehicleParams:
    """Solid-cylinder vehicle. Vertical offsets are positive upwards."""

    mass: float = 50.0
    radius: float = 0.15
    length: float = 1.5
    z_gravity: float = -0.05
    z_buoyancy: float = 0.05
    weight: float = 50.0 * GRAVITY
    buoyancy: float = 50.0 * GRAVITY
    # tuned for zeta ~ 0.2 on roll and pitch of the default geometry
    damping: np.ndarray = field(
        default_factory=lambda: np.array([2.1011, 8.7051, 8.7051])
    )

    def __post_init__(self):
        damping = np.array(self.damping, dtype=float).reshape(3)
        if min(self.mass, self.radius, self.length) <= 0:
            raise ValueError("mass, radius and length must be positive")
        if np.any(damping < 0):
            raise ValueError("damping coefficients must be nonnegative")
        if abs(self.weight - self.buoyancy) > 0.05 * max(self.weight, self.buoyancy):
            raise ValueError("weight and buoyancy must agree within 5% (neutral trim)")
        if not self.z_gravity < self.z_buoyancy:
            raise ValueError("centre of gravity must lie below the centre of buoyancy")
        damping.setflags(write=False)
        object.__setattr__(self, "damping", damping)

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "radius": self.radius,
            "length": self.length,
            "z_gravity": self.z_gravity,
            "z_buoyancy": self.z_buoyancy,
            "weight": self.weight,
            "buoyancy": self.buoyancy,
            "damping": self.damping.tolist(),
        }


@dataclass(frozen=True, eq=False)
class DynamicsDerived:
    """Per-axis ODE coefficients. Yaw has zero stiffness, ``w0 = 0``, ``zeta = inf``."""

    inertia: np.ndarray
    restoring: np.ndarray
    damping: np.ndarray
    natural_frequency: np.ndarray
    damping_ratio: np.ndarray

    def oscillatory(self, axis: int) -> bool:
        return self.restoring[axis] > 0


@dataclass(frozen=True)
class DisturbanceSpec:
    """External moment about one body axis.

    ``amplitude`` is the impulse weight [N m s], the step height [N m] or the
    sinusoid amplitude [N m] depending on ``mode``. Sinusoids are
    ``amplitude * cos(frequency * (t - onset) + phase)`` for ``t >= onset``.
    """

    mode: str
    axis: str = "roll"
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    onset: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        axis_index(self.axis)
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be nonnegative")
        if self.mode == "sinusoid" and not self.frequency > 0:
            raise ValueError("sinusoidal forcing needs a positive frequency")
        if not self.onset >= 0:
            raise ValueError("onset must be nonnegative")

    def scaled(self, factor: float) -> "DisturbanceSpec":
        return DisturbanceSpec(self.mode, self.axis, self.amplitude * factor,
                               self.frequency, self.phase, self.onset)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "axis": self.axis,
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
            "onset": self.onset,
        }


@dataclass(frozen=True, eq=False)
class Response:
    """Sampled angles and body rates, both of shape ``(n, 3)``."""

    sample_rate: float
    angle: np.ndarray
    rate: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.angle.shape[0]) / self.sample_rate

    def rate_series(self) -> RateSeries:
        return RateSeries(self.sample_rate, self.rate)


def cylinder_inertia(mass: float, radius: float, length: float) -> np.ndarray:
    """Principal moments of a solid cylinder whose symmetry axis is body x."""
    transverse = mass * (3.0 * radius**2 + length**2) / 12.0
    return np.array([0.5 * mass * radius**2, transverse, transverse])


def mass_inertia_matrix(params: VehicleParams) -> np.ndarray:
    """6x6 rigid-body mass matrix with the centre of gravity offset on z."""
    m = params.mass
    rz = np.zeros((3, 3))
    # skew-symmetric matrix of r_W = [0, 0, z_W]
    rz[0, 1], rz[1, 0] = -params.z_gravity, params.z_gravity
    out = np.zeros((6, 6))
    out[:3, :3] = m * np.eye(3)
    out[:3, 3:] = -m * rz
    out[3:, :3] = m * rz
    out[3:, 3:] = np.diag(cylinder_inertia(m, params.radius, params.length))
    return out


def restoring_vector(params: VehicleParams, roll: float, pitch: float) -> np.ndarray:
    """Nonlinear restoring forces and moments at the given attitude.

    Moments are written with the sign convention of the left-hand side of the
    equations of motion, so a bottom-heavy hull yields a moment that opposes
    the tilt.
    """
    w, b = params.weight, params.buoyancy
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    righting = params.z_buoyancy * b - params.z_gravity * w
    return np.array(
        [
            (w - b) * sp,
            -(w - b) * cp * sr,
            -(w - b) * cp * cr,
            righting * cp * sr,
            righting * sp,
            0.0,
        ]
    )


def derive(params: VehicleParams) -> DynamicsDerived:
    inertia = cylinder_inertia(params.mass, params.radius, params.length)
    righting = params.z_buoyancy * params.buoyancy - params.z_gravity * params.weight
    if not righting > 0:
        raise StabilityError(
            f"restoring stiffness {righting!r} N m/rad is not positive; vehicle is top-heavy"
        )
    restoring = np.array([righting, righting, 0.0])
    damping = np.array(params.damping, dtype=float)
    natural = np.sqrt(restoring / inertia)
    ratio = np.full(3, math.inf)
    ratio[:2] = damping[:2] / (2.0 * np.sqrt(restoring[:2] * inertia[:2]))
    return DynamicsDerived(inertia, restoring, damping, natural, ratio)


def gamma(spec: DisturbanceSpec, derived: DynamicsDerived) -> float:
    """Torque-to-inertia ratio of a disturbance."""
    return spec.amplitude / derived.inertia[axis_index(spec.axis)]


def frequency_response(derived: DynamicsDerived, axis, omega: float) -> complex:
    """Complex angle-per-moment gain at angular frequency ``omega``."""
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    i = axis_index(axis) if isinstance(axis, str) else int(axis)
    denom = complex(derived.restoring[i] - derived.inertia[i] * omega**2,
                    derived.damping[i] * omega)
    if denom == 0:
        return complex(math.inf, 0.0)
    return 1.0 / denom


# --------------------------------------------------------------------------
# closed-form responses (unit amplitude; callers scale)
# --------------------------------------------------------------------------

def _oscillatory_unit(mode, t, inertia, w0, zeta, omega, phase):
    sigma = zeta * w0
    wd = w0 * math.sqrt(1.0 - zeta * zeta)
    decay = np.exp(-sigma * t)
    if mode == "impulse":
        s, c = np.sin(wd * t), np.cos(wd * t)
        x = decay * s / (inertia * wd)
        v = decay * (c - (sigma / wd) * s) / inertia
    elif mode == "step":
        phi0 = math.acos(zeta)
        gain = 1.0 / (inertia * w0 * w0)
        arg = wd * t + phi0
        x = gain * (1.0 - decay * np.sin(arg) / math.sin(phi0))
        v = gain * decay * (sigma * np.sin(arg) - wd * np.cos(arg)) / math.sin(phi0)
    else:
        denom = complex(w0 * w0 - omega * omega, 2.0 * zeta * w0 * omega)
        if denom == 0:
            raise ValueError("undamped axis forced exactly at resonance")
        amp = 1.0 / (inertia * denom)
        rot = np.exp(1j * (omega * t + phase))
        xp = (amp * rot).real
        vp = (1j * omega * amp * rot).real
        xp0 = (amp * np.exp(1j * phase)).real
        vp0 = (1j * omega * amp * np.exp(1j * phase)).real
        c1 = -xp0
        c2 = (sigma * c1 - vp0) / wd
        s, c = np.sin(wd * t), np.cos(wd * t)
        x = xp + decay * (c1 * c + c2 * s)
        v = vp + decay * ((-sigma * c1 + wd * c2) * c + (-sigma * c2 - wd * c1) * s)
    return x, v


def _integrator_unit(mode, t, inertia, damping, omega, phase):
    # zero stiffness: I x'' + D x' = tau
    if damping == 0:
        if mode == "impulse":
            return t / inertia, np.full_like(t, 1.0 / inertia)
        if mode == "step":
            return 0.5 * t * t / inertia, t / inertia
        k = 1.0 / (inertia * omega)
        theta = omega * t + phase
        v = k * (np.sin(theta) - math.sin(phase))
        x = k * (-(np.cos(theta) - math.cos(phase)) / omega - t * math.sin(phase))
        return x, v
    a = damping / inertia
    decay = np.exp(-a * t)
    if mode == "impulse":
        return (1.0 - decay) / damping, decay / inertia
    if mode == "step":
        return (t - (1.0 - decay) / a) / damping, (1.0 - decay) / damping
    vel = 1.0 / complex(damping, omega * inertia)
    rot = np.exp(1j * (omega * t + phase))
    vp0 = (vel * np.exp(1j * phase)).real
    v = (vel * rot).real - vp0 * decay
    x = (vel / (1j * omega) * (rot - np.exp(1j * phase))).real - vp0 * (1.0 - decay) / a
    return x, v


def _n_samples(duration: float, sample_rate: float) -> int:
    n = int(round(duration * sample_rate))
    if n < 1:
        raise ValueError("duration * sample_rate must be at least 1")
    return n


def _warn_large_angles(angle: np.ndarray):
    peak = float(np.max(np.abs(angle))) if angle.size else 0.0
    if peak > SMALL_ANGLE_LIMIT:
        warnings.warn(
            f"peak angle {peak:.3f} rad exceeds the small-angle limit of "
            f"{SMALL_ANGLE_LIMIT} rad",
            SmallAngleWarning,
            stacklevel=3,
        )


def respond_analytic(derived: DynamicsDerived, spec: DisturbanceSpec, duration: float,
                     sample_rate: float) -> Response:
    """Closed-form response from rest to one disturbance."""
    n = _n_samples(duration, sample_rate)
    i = axis_index(spec.axis)
    angle = np.zeros((n, 3))
    rate = np.zeros((n, 3))
    t = np.arange(n) / sample_rate - spec.onset
    active = t >= 0
    ta = t[active]
    if derived.oscillatory(i):
        zeta = float(derived.damping_ratio[i])
        if zeta >= 1.0:
            raise UnsupportedRegimeError(
                f"{spec.axis} damping ratio {zeta:.3f} >= 1; only underdamped responses "
                "are supported"
            )
        x, v = _oscillatory_unit(spec.mode, ta, float(derived.inertia[i]),
                                 float(derived.natural_frequency[i]), zeta,
                                 spec.frequency, spec.phase)
    else:
        x, v = _integrator_unit(spec.mode, ta, float(derived.inertia[i]),
                                float(derived.damping[i]), spec.frequency, spec.phase)
    angle[active, i] = spec.amplitude * x
    rate[active, i] = spec.amplitude * v
    _warn_large_angles(angle)
    return Response(sample_rate, angle, rate)


def step_formula(t, zeta: float, natural_frequency: float):
    """Normalised step response ``1 - exp(-zeta w0 t) sin(wd t + phi0) / sin(phi0)``."""
    t = np.asarray(t, dtype=float)
    phi0 = math.acos(zeta)
    wd = math.sqrt(1.0 - zeta * zeta) * natural_frequency
    return 1.0 - np.exp(-zeta * natural_frequency * t) * np.sin(wd * t + phi0) / math.sin(phi0)


# --------------------------------------------------------------------------
# RK4 oracle
# --------------------------------------------------------------------------

_MODE_CODES = {"impulse": 0, "step": 1, "sinusoid": 2}


@njit(cache=True)
def _forcing(code, amp, omega, phase, t_rel):
    if code == 1:
        return amp
    if code == 2:
        return amp * math.cos(omega * t_rel + phase)
    return 0.0


@njit(cache=True)
def _rk4_step(x, v, t_rel, h, inertia, damping, stiff, code, amp, omega, phase):
    f0 = _forcing(code, amp, omega, phase, t_rel)
    fm = _forcing(code, amp, omega, phase, t_rel + 0.5 * h)
    f1 = _forcing(code, amp, omega, phase, t_rel + h)
    k1x = v
    k1v = (f0 - damping * v - stiff * x) / inertia
    x2, v2 = x + 0.5 * h * k1x, v + 0.5 * h * k1v
    k2x = v2
    k2v = (fm - damping * v2 - stiff * x2) / inertia
    x3, v3 = x + 0.5 * h * k2x, v + 0.5 * h * k2v
    k3x = v3
    k3v = (fm - damping * v3 - stiff * x3) / inertia
    x4, v4 = x + h * k3x, v + h * k3v
    k4x = v4
    k4v = (f1 - damping * v4 - stiff * x4) / inertia
    x_new = x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
    v_new = v + h * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
    return x_new, v_new


@njit(cache=True)
def _integrate(inertia, damping, stiff, code, amp, omega, phase, onset, sample_rate,
               n, substeps):
    h = 1.0 / (sample_rate * substeps)
    xs = np.zeros(n)
    vs = np.zeros(n)
    # first substep grid point at or after the onset
    ratio = onset / h
    j0 = int(math.ceil(ratio))
    if abs(ratio - round(ratio)) < 1e-9:
        j0 = int(round(ratio))
    x = 0.0
    # an impulse is an instantaneous velocity jump at the onset
    v = amp / inertia if code == 0 else 0.0
    t_first = j0 * h
    if t_first > onset:
        x, v = _rk4_step(x, v, 0.0, t_first - onset, inertia, damping, stiff,
                         code, amp, omega, phase)
    total = (n - 1) * substeps
    for j in range(j0, total + 1):
        if j % substeps == 0:
            xs[j // substeps] = x
            vs[j // substeps] = v
        if j < total:
            x, v = _rk4_step(x, v, j * h - onset, h, inertia, damping, stiff,
                             code, amp, omega, phase)
    return xs, vs


def respond_numeric(derived: DynamicsDerived, spec: DisturbanceSpec, duration: float,
                    sample_rate: float, substeps: int = 10) -> Response:
    """Fixed-step RK4 integration of the linearised ODE from rest."""
    if substeps < 10:
        raise ValueError("at least 10 internal substeps per sample are required")
    n = _n_samples(duration, sample_rate)
    i = axis_index(spec.axis)
    xs, vs = _integrate(float(derived.inertia[i]), float(derived.damping[i]),
                        float(derived.restoring[i]), _MODE_CODES[spec.mode],
                        float(spec.amplitude), float(spec.frequency), float(spec.phase),
                        float(spec.onset), float(sample_rate), n, int(substeps))
    angle = np.zeros((n, 3))
    rate = np.zeros((n, 3))
    angle[:, i] = xs
    rate[:, i] = vs
    _warn_large_angles(angle)
    return Response(sample_rate, angle, rate)
