"""
Stationary gyroscope measurement synthesis.

The sensor model is the usual linearised one,

    w_meas = M @ w_true + b_g + w_g,

with a scale-factor/misalignment matrix ``M``, a run-constant bias ``b_g`` and
zero-mean white Gaussian noise ``w_g``. The per-sample noise standard
deviation follows from the noise density as ``density * sqrt(sample_rate)``.
Bias instability and rate random walk are deliberately not modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frames import EulerAngles, GeoConfig, earth_rate_body

DEG_PER_HOUR = math.radians(1.0) / 3600.0
#: 1 deg/sqrt(h) expressed in rad/s/sqrt(Hz)
DEG_PER_SQRT_HOUR = math.radians(1.0) / 60.0

#: tactical-grade MEMS defaults
DEFAULT_NOISE_DENSITY = 0.2 * DEG_PER_SQRT_HOUR
DEFAULT_BIAS_BOUND = 5.0 * DEG_PER_HOUR


@dataclass(frozen=True, eq=False)
class RateSeries:
    """Uniformly sampled 3-axis angular rate series, shape ``(n, 3)`` in rad/s."""

    sample_rate: float
    samples: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 3:
            raise ValueError(f"samples must have shape (n, 3), got {samples.shape}")
        if samples.shape[0] == 0:
            raise ValueError("samples must be nonempty")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RateSeries):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.start_time == other.start_time
            and np.array_equal(self.samples, other.samples)
        )

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) / self.sample_rate

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def mean_rates(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    def with_samples(self, samples) -> "RateSeries":
        return RateSeries(self.sample_rate, samples, self.start_time)


@dataclass(frozen=True, eq=False)
class GyroErrorModel:
    scale_misalignment: np.ndarray = field(default_factory=lambda: np.eye(3))
    bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    noise_density: np.ndarray = field(
        default_factory=lambda: np.full(3, DEFAULT_NOISE_DENSITY)
    )
    seed: int = 0

    def __post_init__(self):
        m = np.array(self.scale_misalignment, dtype=float)
        bias = np.array(self.bias, dtype=float).reshape(3)
        density = np.broadcast_to(np.asarray(self.noise_density, dtype=float), (3,)).copy()
        if m.shape != (3, 3):
            raise ValueError("scale_misalignment must be 3x3")
        if np.any(np.diag(m) < 0.9) or np.any(np.diag(m) > 1.1):
            raise ValueError("scale factors (diagonal of M) must lie in [0.9, 1.1]")
        if np.any(density < 0):
            raise ValueError("noise_density must be nonnegative")
        for arr in (m, bias, density):
            arr.setflags(write=False)
        object.__setattr__(self, "scale_misalignment", m)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "noise_density", density)

    def noise_std(self, sample_rate: float) -> np.ndarray:
        return self.noise_density * math.sqrt(sample_rate)

    def to_dict(self) -> dict:
        return {
            "scale_misalignment": self.scale_misalignment.tolist(),
            "bias": self.bias.tolist(),
            "noise_density": self.noise_density.tolist(),
            "seed": int(self.seed),
        }


def draw_run_bias(seed: int, bound: float = DEFAULT_BIAS_BOUND) -> np.ndarray:
    """Per-run constant bias, uniform in ``[-bound, bound]`` on each axis."""
    return np.random.default_rng(seed).uniform(-bound, bound, size=3)


def default_model(seed: int, noise_density=DEFAULT_NOISE_DENSITY,
                  bias_bound: float = DEFAULT_BIAS_BOUND) -> GyroErrorModel:
    return GyroErrorModel(
        bias=draw_run_bias(seed, bias_bound), noise_density=noise_density, seed=seed
    )


def measure(true_rates: RateSeries, model: GyroErrorModel) -> RateSeries:
    """Corrupt a true rate series with the error model (deterministic in ``model.seed``)."""
    rng = np.random.default_rng(model.seed)
    n = len(true_rates)
    noise = rng.standard_normal((n, 3)) * model.noise_std(true_rates.sample_rate)
    out = true_rates.samples @ model.scale_misalignment.T + model.bias + noise
    return true_rates.with_samples(out)


def stationary_truth(geo: GeoConfig, attitude: EulerAngles, duration: float,
                     sample_rate: float) -> RateSeries:
    """Constant earth-rate series for a vehicle at rest."""
    n = int(round(duration * sample_rate))
    if n < 1:
        raise ValueError("duration * sample_rate must be at least 1")
    w = earth_rate_body(geo, attitude).as_array()
    return RateSeries(sample_rate, np.tile(w, (n, 1)))
