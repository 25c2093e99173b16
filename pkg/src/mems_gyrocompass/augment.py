"""
Dataset augmentation: stationary gyro measurements plus simulated dynamics.

For each heading label and repetition, a disturbance is drawn, its rate
response is solved in closed form and added sample-by-sample to a synthetic
stationary measurement at that heading. Disturbance parameters and sensor
noise are seeded per item from the augmentation seed and item index only, so
datasets that differ only in ``gamma_target`` share the same noise, modes,
axes, frequencies and phases.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import dynamics as dyn
from .frames import EulerAngles, GeoConfig, wrap_angle
from .gyro import GyroErrorModel, RateSeries, measure, stationary_truth
from .seeding import derive_seed

SCHEMA_VERSION = 1
CSV_COLUMNS = ["item_id", "t", "p", "q", "r", "heading_label_rad", "gamma", "mode"]
SPLIT_NAMES = ("train", "validation", "test")


class ConfigError(ValueError):
    pass


class ShapeError(ValueError):
    pass


def heading_grid(count: int = 72) -> list:
    """``count`` headings uniformly spaced over [-pi, pi)."""
    return [wrap_angle(-math.pi + 2.0 * math.pi * k / count) for k in range(count)]


def _as_range(value):
    if isinstance(value, (list, tuple)):
        lo, hi = (float(v) for v in value)
        return lo, hi
    v = float(value)
    return v, v


@dataclass(frozen=True)
class AugmentConfig:
    gamma_target: object = 0.0  # scalar or (low, high)
    mode_mix: dict = field(
        default_factory=lambda: {"impulse": 1.0, "step": 1.0, "sinusoid": 1.0}
    )
    frequency_range: tuple = (0.5, 3.0)
    phase_range: tuple = (0.0, 2.0 * math.pi)
    headings: tuple = field(default_factory=lambda: tuple(heading_grid(72)))
    per_heading_count: int = 20
    window_length: int = 6000
    sample_rate: float = 100.0
    seed: int = 0
    include_yaw: bool = False
    onset: float = 0.0

    def __post_init__(self):
        if self.per_heading_count < 1:
            raise ConfigError("per_heading_count must be >= 1")
        if self.window_length < 2:
            raise ConfigError("window_length must be >= 2")
        if not self.sample_rate > 0:
            raise ConfigError("sample_rate must be positive")
        if len(self.headings) == 0:
            raise ConfigError("headings must be nonempty")
        unknown = set(self.mode_mix) - set(dyn.MODES)
        if unknown:
            raise ConfigError(f"unknown modes in mode_mix: {sorted(unknown)}")
        weights = np.array([self.mode_mix.get(m, 0.0) for m in dyn.MODES], dtype=float)
        if np.any(weights < 0) or not weights.sum() > 0:
            raise ConfigError("mode_mix weights must be nonnegative with a positive sum")
        for name in ("frequency_range", "phase_range"):
            lo, hi = _as_range(getattr(self, name))
            if not lo <= hi:
                raise ConfigError(f"{name} is empty")
        lo, hi = _as_range(self.gamma_target)
        if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo <= hi):
            raise ConfigError(f"infeasible gamma target {self.gamma_target!r}")
        if _as_range(self.frequency_range)[0] <= 0:
            raise ConfigError("frequency_range must be positive")
        object.__setattr__(self, "headings", tuple(wrap_angle(h) for h in self.headings))

    @property
    def duration(self) -> float:
        return self.window_length / self.sample_rate

    @property
    def axes(self) -> tuple:
        return ("roll", "pitch", "yaw") if self.include_yaw else ("roll", "pitch")

    def mode_probabilities(self) -> np.ndarray:
        w = np.array([self.mode_mix.get(m, 0.0) for m in dyn.MODES], dtype=float)
        return w / w.sum()

    def to_dict(self) -> dict:
        gt = self.gamma_target
        return {
            "gamma_target": list(gt) if isinstance(gt, (list, tuple)) else gt,
            "mode_mix": dict(self.mode_mix),
            "frequency_range": list(self.frequency_range),
            "phase_range": list(self.phase_range),
            "headings": list(self.headings),
            "per_heading_count": self.per_heading_count,
            "window_length": self.window_length,
            "sample_rate": self.sample_rate,
            "seed": self.seed,
            "include_yaw": self.include_yaw,
            "onset": self.onset,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AugmentConfig":
        data = dict(data)
        for key in ("frequency_range", "phase_range", "headings"):
            if key in data:
                data[key] = tuple(data[key])
        if isinstance(data.get("gamma_target"), list):
            data["gamma_target"] = tuple(data["gamma_target"])
        return cls(**data)


@dataclass(frozen=True, eq=False)
class DatasetItem:
    window: RateSeries
    heading: float
    gamma: float
    mode: str


@dataclass(frozen=True, eq=False)
class Provenance:
    """Everything needed to regenerate any item in isolation."""

    config: AugmentConfig
    geo: GeoConfig
    vehicle: dyn.VehicleParams
    gyro_model: GyroErrorModel

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "augment": self.config.to_dict(),
            "geo": {"latitude": self.geo.latitude, "earth_rate": self.geo.earth_rate},
            "vehicle": self.vehicle.to_dict(),
            "gyro": self.gyro_model.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Provenance":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported dataset schema {data.get('schema_version')!r}")
        return cls(
            AugmentConfig.from_dict(data["augment"]),
            GeoConfig(**data["geo"]),
            dyn.VehicleParams(**data["vehicle"]),
            GyroErrorModel(**data["gyro"]),
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Windows of shape ``(n_items, window_length, 3)`` with heading labels."""

    windows: np.ndarray
    headings: np.ndarray
    gammas: np.ndarray
    modes: tuple
    item_ids: np.ndarray
    sample_rate: float
    provenance: Provenance = None
    disturbances: tuple = ()

    def __post_init__(self):
        n = self.windows.shape[0]
        if self.windows.ndim != 3 or self.windows.shape[2] != 3:
            raise ShapeError("windows must have shape (n_items, window_length, 3)")
        for name in ("headings", "gammas", "modes", "item_ids"):
            if len(getattr(self, name)) != n:
                raise ShapeError(f"{name} length does not match the number of windows")

    def __len__(self):
        return self.windows.shape[0]

    def __getitem__(self, i) -> DatasetItem:
        return DatasetItem(RateSeries(self.sample_rate, self.windows[i]),
                           float(self.headings[i]), float(self.gammas[i]), self.modes[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def window_length(self) -> int:
        return self.windows.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=int)
        return LabeledDataset(
            self.windows[idx],
            self.headings[idx],
            self.gammas[idx],
            tuple(self.modes[i] for i in idx),
            self.item_ids[idx],
            self.sample_rate,
            self.provenance,
            tuple(self.disturbances[i] for i in idx) if self.disturbances else (),
        )

    def components(self, i):
        """Regenerate (truth, measured stationary, dynamic) for item ``i``."""
        if self.provenance is None:
            raise ValueError("dataset carries no provenance")
        return item_components(self.provenance, int(self.item_ids[i]))


def superimpose(stationary: RateSeries, dynamic: RateSeries) -> RateSeries:
    """Per-axis sum of two rate series of identical length and sample rate."""
    if len(stationary) != len(dynamic):
        raise ShapeError(f"length mismatch: {len(stationary)} vs {len(dynamic)}")
    if stationary.sample_rate != dynamic.sample_rate:
        raise ShapeError(
            f"sample rate mismatch: {stationary.sample_rate} vs {dynamic.sample_rate}"
        )
    return RateSeries(stationary.sample_rate, stationary.samples + dynamic.samples,
                      stationary.start_time)


def draw_disturbance(cfg: AugmentConfig, derived: dyn.DynamicsDerived,
                     item_id: int) -> dyn.DisturbanceSpec:
    """Disturbance parameters for one item; independent of every other item."""
    rng = np.random.default_rng(derive_seed(cfg.seed, "disturbance", item_id))
    mode = dyn.MODES[rng.choice(len(dyn.MODES), p=cfg.mode_probabilities())]
    axis = cfg.axes[rng.integers(len(cfg.axes))]
    f_lo, f_hi = _as_range(cfg.frequency_range)
    p_lo, p_hi = _as_range(cfg.phase_range)
    g_lo, g_hi = _as_range(cfg.gamma_target)
    frequency = rng.uniform(f_lo, f_hi)
    phase = rng.uniform(p_lo, p_hi)
    g = rng.uniform(g_lo, g_hi) if g_hi > g_lo else g_lo
    amplitude = g * derived.inertia[dyn.axis_index(axis)]
    return dyn.DisturbanceSpec(mode, axis, float(amplitude), float(frequency),
                               float(phase), cfg.onset)


def _check_feasible(cfg: AugmentConfig, derived: dyn.DynamicsDerived):
    for axis in cfg.axes:
        i = dyn.axis_index(axis)
        if derived.oscillatory(i) and derived.damping_ratio[i] >= 1.0:
            raise ConfigError(
                f"{axis} axis is not underdamped (zeta={derived.damping_ratio[i]:.3f}); "
                "gamma target cannot be realised"
            )


def item_components(prov: Provenance, item_id: int):
    cfg = prov.config
    derived = dyn.derive(prov.vehicle)
    heading = cfg.headings[item_id // cfg.per_heading_count]
    spec = draw_disturbance(cfg, derived, item_id)
    truth = stationary_truth(prov.geo, EulerAngles(0.0, 0.0, heading), cfg.duration,
                             cfg.sample_rate)
    model = replace(prov.gyro_model, seed=derive_seed(prov.gyro_model.seed, "noise", item_id))
    stationary = measure(truth, model)
    dynamic = dyn.respond_analytic(derived, spec, cfg.duration, cfg.sample_rate).rate_series()
    return truth, stationary, dynamic, spec


def _build_items(prov: Provenance, ids):
    derived = dyn.derive(prov.vehicle)
    out = []
    for item_id in ids:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", dyn.SmallAngleWarning)
            _, stationary, dynamic, spec = item_components(prov, item_id)
        large = any(issubclass(w.category, dyn.SmallAngleWarning) for w in caught)
        out.append((superimpose(stationary, dynamic).samples, spec,
                    dyn.gamma(spec, derived), large))
    return out


def build_dataset(cfg: AugmentConfig, geo: GeoConfig, vehicle: dyn.VehicleParams,
                  gyro_model: GyroErrorModel, jobs: int = 1) -> LabeledDataset:
    """Generate every item; ``jobs > 1`` spreads items over worker processes.

    Items are seeded individually, so the result does not depend on ``jobs``.
    """
    _check_feasible(cfg, dyn.derive(vehicle))
    prov = Provenance(cfg, geo, vehicle, gyro_model)
    n = len(cfg.headings) * cfg.per_heading_count
    if jobs > 1:
        chunks = np.array_split(np.arange(n), jobs)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_build_items, [prov] * len(chunks), chunks)
            items = [item for part in parts for item in part]
    else:
        items = _build_items(prov, range(n))
    n_large = sum(item[3] for item in items)
    if n_large:
        warnings.warn(f"{n_large} of {n} items exceed the small-angle limit "
                      f"({dyn.SMALL_ANGLE_LIMIT} rad)", dyn.SmallAngleWarning, stacklevel=2)
    windows = np.stack([item[0] for item in items])
    specs = tuple(item[1] for item in items)
    headings = np.array([cfg.headings[i // cfg.per_heading_count] for i in range(n)])
    gammas = np.array([item[2] for item in items], dtype=float)
    return LabeledDataset(windows, headings, gammas, tuple(s.mode for s in specs),
                          np.arange(n), cfg.sample_rate, prov, specs)


def split(dataset: LabeledDataset, fractions=(0.8, 0.1, 0.1), seed=None):
    """Heading-stratified (train, validation, test) partition."""
    fractions = np.asarray(fractions, dtype=float)
    if fractions.shape != (3,) or np.any(fractions < 0):
        raise ConfigError("fractions must be three nonnegative numbers")
    if abs(fractions.sum() - 1.0) > 1e-9:
        raise ConfigError(f"split fractions sum to {fractions.sum()!r}, not 1")
    if seed is None:
        seed = dataset.provenance.config.seed if dataset.provenance else 0
    rng = np.random.default_rng(derive_seed(seed, "split"))
    parts = ([], [], [])
    for heading in np.unique(dataset.headings):
        members = np.flatnonzero(dataset.headings == heading)
        members = members[rng.permutation(len(members))]
        n_train = int(round(fractions[0] * len(members)))
        n_val = min(int(round(fractions[1] * len(members))), len(members) - n_train)
        parts[0].extend(members[:n_train])
        parts[1].extend(members[n_train:n_train + n_val])
        parts[2].extend(members[n_train + n_val:])
    return tuple(dataset.subset(np.sort(np.array(p, dtype=int))) for p in parts)


# --------------------------------------------------------------------------
# file format
# --------------------------------------------------------------------------

def save_dataset(splits, out_dir, provenance: Provenance) -> list:
    """Write ``dataset.json`` plus one CSV per split; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = provenance.to_dict()
    meta["splits"] = {name: f"{name}.csv" for name in SPLIT_NAMES}
    meta["columns"] = CSV_COLUMNS
    meta["float_format"] = "%.17g"
    paths = [out / "dataset.json"]
    paths[0].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    for name, part in zip(SPLIT_NAMES, splits):
        path = out / f"{name}.csv"
        _split_frame(part).to_csv(path, index=False, float_format="%.17g",
                                  lineterminator="\n")
        paths.append(path)
    return paths


def _split_frame(part: LabeledDataset) -> pd.DataFrame:
    n, length = len(part), part.window_length
    t = np.tile(np.arange(length) / part.sample_rate, n)
    return pd.DataFrame({
        "item_id": np.repeat(part.item_ids, length),
        "t": t,
        "p": part.windows[:, :, 0].ravel(),
        "q": part.windows[:, :, 1].ravel(),
        "r": part.windows[:, :, 2].ravel(),
        "heading_label_rad": np.repeat(part.headings, length),
        "gamma": np.repeat(part.gammas, length),
        "mode": np.repeat(np.array(part.modes, dtype=object), length),
    }, columns=CSV_COLUMNS)


def load_dataset(out_dir):
    """Read the files written by :func:`save_dataset`; returns ``(splits, provenance)``."""
    out = Path(out_dir)
    meta_path = out / "dataset.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"missing dataset metadata: {meta_path}")
    meta = json.loads(meta_path.read_text())
    prov = Provenance.from_dict(meta)
    cfg = prov.config
    splits = []
    for name in SPLIT_NAMES:
        path = out / meta["splits"][name]
        if not path.exists():
            raise FileNotFoundError(f"missing dataset split: {path}")
        frame = pd.read_csv(path, float_precision="round_trip")
        if list(frame.columns) != CSV_COLUMNS:
            raise ShapeError(f"{path}: unexpected columns {list(frame.columns)}")
        length = cfg.window_length
        n = len(frame) // length
        if n * length != len(frame):
            raise ShapeError(f"{path}: row count is not a multiple of the window length")
        windows = frame[["p", "q", "r"]].to_numpy().reshape(n, length, 3)
        first = frame.iloc[::length]
        derived = dyn.derive(prov.vehicle)
        ids = first["item_id"].to_numpy().astype(int)
        splits.append(LabeledDataset(
            windows,
            first["heading_label_rad"].to_numpy(),
            first["gamma"].to_numpy(),
            tuple(str(m) for m in first["mode"]),
            ids,
            cfg.sample_rate,
            prov,
            tuple(draw_disturbance(cfg, derived, int(i)) for i in ids),
        ))
    return tuple(splits), prov
