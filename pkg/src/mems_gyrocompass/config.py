"""
Run configuration: one YAML file with a section per module.

Missing keys take the defaults below; unknown keys are rejected. All random
streams are seeded from the single master ``seed`` through
:func:`~mems_gyrocompass.seeding.derive_seed` with a purpose label
(``"gyro"``, ``"augment"``, ``"train"``, ``"snr"``).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import augment as aug
from . import dynamics as dyn
from . import filters as flt
from . import learner as lrn
from .analysis import BenchConfig, BenchSetup
from .frames import EARTH_RATE, GeoConfig
from .gyro import DEG_PER_HOUR, DEG_PER_SQRT_HOUR, default_model
from .seeding import derive_seed


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "seed": 0,
    "output": "out",
    "geo": {"latitude_deg": 32.0, "earth_rate": EARTH_RATE},
    "vehicle": dyn.VehicleParams().to_dict(),
    "gyro": {
        "noise_density_deg_per_sqrt_h": 0.2,
        "bias_bound_deg_per_h": 5.0,
        "scale_misalignment": np.eye(3).tolist(),
    },
    "augment": {
        "gamma_target": 0.0,
        "mode_mix": {"impulse": 1.0, "step": 1.0, "sinusoid": 1.0},
        "frequency_range": [0.5, 3.0],
        "phase_range": [0.0, 2.0 * math.pi],
        "heading_count": 72,
        "per_heading_count": 20,
        "window_length": 6000,
        "sample_rate": 100.0,
        "include_yaw": False,
        "onset": 0.0,
    },
    "filter": {k: v for k, v in flt.FilterConfig().to_dict().items() if k != "kind"},
    "train": {k: v for k, v in lrn.TrainConfig().__dict__.items() if k != "seed"},
    "bench": {
        "gammas": [0.0, 0.1, 0.5, 1.0, 10.0],
        "methods": ["wavelet", "wiener", "savitzky_golay", "fir", "learner"],
        "split": [0.8, 0.1, 0.1],
        "averaging_times": list(BenchConfig().averaging_times),
        "snr_duration": 1000.0,
        "snr_mode": "sinusoid",
        "snr_axis": "roll",
        "snr_frequency": 1.0,
        "snr_phase": 0.0,
        "snr_heading_deg": 0.0,
    },
    "simulate": {
        "modes": ["impulse", "step", "sinusoid"],
        "axis": "roll",
        "gamma": 1.0,
        "amplitude": None,  # overrides gamma when set [N m or N m s]
        "frequency": 1.0,
        "phase": 0.0,
        "onset": 0.0,
        "duration": 20.0,
        "sample_rate": 100.0,
    },
}

# sections whose value is a free-form mapping rather than a fixed key set
_OPEN = {("augment", "mode_mix")}


def _merge(base: dict, override: dict, path=()) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = ".".join(path + (str(key),))
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and path + (key,) not in _OPEN:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            out[key] = _merge(base[key], value, path + (key,))
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class RunConfig:
    data: dict

    @classmethod
    def from_mapping(cls, mapping: dict = None) -> "RunConfig":
        cfg = cls(_merge(DEFAULTS, mapping or {}))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            mapping = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None
        if mapping is not None and not isinstance(mapping, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_mapping(mapping)

    def with_overrides(self, **values) -> "RunConfig":
        data = copy.deepcopy(self.data)
        for dotted, value in values.items():
            *parents, leaf = dotted.split(".")
            node = data
            for p in parents:
                node = node[p]
            node[leaf] = value
        cfg = RunConfig(data)
        cfg.validate()
        return cfg

    def validate(self):
        for section in ("geo", "vehicle", "gyro", "augment", "filter", "train", "bench"):
            try:
                getattr(self, section)()
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid [{section}] section: {exc}") from None
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        sim = self.data["simulate"]
        unknown = set(sim["modes"]) - set(dyn.MODES)
        if unknown:
            raise ConfigError(f"invalid [simulate] section: unknown modes {sorted(unknown)}")
        try:
            dyn.axis_index(sim["axis"])
        except ValueError as exc:
            raise ConfigError(f"invalid [simulate] section: {exc}") from None

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def output(self) -> Path:
        return Path(self.data["output"])

    def geo(self) -> GeoConfig:
        g = self.data["geo"]
        return GeoConfig(math.radians(g["latitude_deg"]), float(g["earth_rate"]))

    def vehicle(self) -> dyn.VehicleParams:
        return dyn.VehicleParams(**self.data["vehicle"])

    def gyro(self):
        g = self.data["gyro"]
        model = default_model(
            derive_seed(self.seed, "gyro"),
            noise_density=g["noise_density_deg_per_sqrt_h"] * DEG_PER_SQRT_HOUR,
            bias_bound=g["bias_bound_deg_per_h"] * DEG_PER_HOUR,
        )
        return type(model)(g["scale_misalignment"], model.bias, model.noise_density, model.seed)

    def augment(self) -> aug.AugmentConfig:
        a = dict(self.data["augment"])
        a["headings"] = tuple(aug.heading_grid(int(a.pop("heading_count"))))
        a["seed"] = derive_seed(self.seed, "augment")
        return aug.AugmentConfig.from_dict(a)

    def filter(self) -> flt.FilterConfig:
        return flt.FilterConfig(**self.data["filter"])

    def train(self) -> lrn.TrainConfig:
        return lrn.TrainConfig(seed=derive_seed(self.seed, "train"), **self.data["train"])

    def bench(self) -> BenchConfig:
        b = dict(self.data["bench"])
        b["snr_heading"] = math.radians(b.pop("snr_heading_deg"))
        for key in ("gammas", "methods", "split", "averaging_times"):
            b[key] = tuple(b[key])
        return BenchConfig(**b)

    def simulate(self) -> dict:
        return dict(self.data["simulate"])

    def setup(self) -> BenchSetup:
        return BenchSetup(self.geo(), self.vehicle(), self.gyro(), self.augment(),
                          self.filter(), self.train(), self.bench(), self.seed)


def default_yaml() -> str:
    return yaml.safe_dump(DEFAULTS, sort_keys=False)
