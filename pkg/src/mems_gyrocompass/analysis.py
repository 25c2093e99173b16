"""
SNR analysis and the benchmark grid (methods x disturbance intensity).

SNR convention: the signal amplitude is the squared horizontal earth rate and
the noise amplitude is the squared norm of the per-axis (p, q) standard
deviations of the averaged residual; both go through ``20 log10``. For white
noise the residual variance of a K-sample average falls as 1/K, so the SNR
rises by 20 dB per decade of averaging time.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import augment as aug
from . import dynamics as dyn
from . import filters as flt
from . import learner as lrn
from .frames import EulerAngles, GeoConfig
from .gyro import GyroErrorModel, RateSeries, measure, stationary_truth
from .seeding import derive_seed

METHODS = ("wavelet", "wiener", "savitzky_golay", "fir", "learner")
METHOD_LABELS = {
    "wavelet": "Wavelet",
    "wiener": "Wiener",
    "savitzky_golay": "SG",
    "fir": "FIR",
    "learner": "Learner",
}


class InfiniteSNRError(ValueError):
    pass


class BenchError(RuntimeError):
    pass


def snr_db(signal_amplitude: float, noise_amplitude: float) -> float:
    if not noise_amplitude > 0:
        raise InfiniteSNRError("noise amplitude is zero; SNR is infinite")
    return 20.0 * math.log10(signal_amplitude / noise_amplitude)


def block_means(x: np.ndarray, block: int) -> np.ndarray:
    """Means of consecutive non-overlapping blocks (trailing remainder dropped)."""
    n = (x.shape[0] // block) * block
    return x[:n].reshape(-1, block, *x.shape[1:]).mean(axis=1)


def snr_vs_averaging(series: RateSeries, truth, averaging_times) -> np.ndarray:
    """SNR [dB] of the horizontal earth rate after averaging for each time.

    ``truth`` is the noise-free body rate vector (signal). Returns an array of
    ``(averaging_time, snr_db)`` rows.
    """
    truth = np.asarray(getattr(truth, "as_array", lambda: truth)(), dtype=float)
    signal = float(truth[0] ** 2 + truth[1] ** 2)
    residual = series.samples[:, :2] - truth[:2]
    rows = []
    for t_avg in averaging_times:
        k = int(round(t_avg * series.sample_rate))
        if k < 1 or k * 2 > len(series):
            raise ValueError(
                f"averaging time {t_avg} s needs at least two blocks within the "
                f"{series.duration} s series"
            )
        spread = block_means(residual, k).std(axis=0)
        rows.append((float(t_avg), snr_db(signal, float(np.sum(spread**2)))))
    return np.array(rows)


def slope_per_decade(curve: np.ndarray) -> float:
    """Least-squares SNR slope in dB per decade of averaging time."""
    return float(np.polyfit(np.log10(curve[:, 0]), curve[:, 1], 1)[0])


def zero_crossing(curve: np.ndarray) -> float:
    """First averaging time at which the SNR is >= 0 dB (``inf`` if never)."""
    hits = np.flatnonzero(curve[:, 1] >= 0)
    return float(curve[hits[0], 0]) if hits.size else math.inf


def snr_series(geo: GeoConfig, model: GyroErrorModel, disturbance, derived, duration: float,
               sample_rate: float, heading: float = 0.0):
    """Stationary measurement plus optional dynamics; returns ``(series, truth)``."""
    truth = stationary_truth(geo, EulerAngles(0.0, 0.0, heading), duration, sample_rate)
    series = measure(truth, model)
    if disturbance is not None and disturbance.amplitude > 0:
        motion = dyn.respond_analytic(derived, disturbance, duration, sample_rate)
        series = aug.superimpose(series, motion.rate_series())
    return series, truth.samples[0]


# --------------------------------------------------------------------------
# benchmark
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchConfig:
    gammas: tuple = (0.0, 0.1, 0.5, 1.0, 10.0)
    methods: tuple = METHODS
    split: tuple = (0.8, 0.1, 0.1)
    averaging_times: tuple = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
    snr_duration: float = 1000.0
    snr_mode: str = "sinusoid"
    snr_axis: str = "roll"
    snr_frequency: float = 1.0
    snr_phase: float = 0.0
    snr_heading: float = 0.0

    def __post_init__(self):
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; expected a subset of {METHODS}")
        if len(self.gammas) == 0 or len(self.methods) == 0:
            raise ValueError("bench grid needs at least one gamma and one method")
        if any(g < 0 for g in self.gammas):
            raise ValueError("gammas must be nonnegative")


@dataclass(frozen=True)
class BenchSetup:
    """Everything a bench run depends on, fully seeded."""

    geo: GeoConfig
    vehicle: dyn.VehicleParams
    gyro_model: GyroErrorModel
    augment: aug.AugmentConfig
    filter: flt.FilterConfig
    train: lrn.TrainConfig
    bench: BenchConfig
    seed: int = 0

    def digest(self) -> str:
        return config_digest(self.describe())

    def describe(self) -> dict:
        return {
            "seed": self.seed,
            "geo": {"latitude": self.geo.latitude, "earth_rate": self.geo.earth_rate},
            "vehicle": self.vehicle.to_dict(),
            "gyro": self.gyro_model.to_dict(),
            "augment": self.augment.to_dict(),
            "filter": self.filter.to_dict(),
            "train": dict(self.train.__dict__),
            "bench": {k: list(v) if isinstance(v, tuple) else v
                      for k, v in self.bench.__dict__.items()},
        }


def config_digest(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def gamma_label(g: float) -> str:
    return "N/D" if g == 0 else f"{g:g}"


@dataclass
class CellResult:
    gamma: float
    rmse: dict
    metrics: list = field(default_factory=list)
    params: lrn.RegressorParams = None
    snr: np.ndarray = None


@dataclass
class BenchReport:
    gammas: tuple
    methods: tuple
    rmse_deg: np.ndarray  # (methods, gammas)
    snr_curves: dict
    loss_curves: dict
    checkpoints: dict
    provenance: dict

    def rmse(self, method: str, gamma: float) -> float:
        return float(self.rmse_deg[self.methods.index(method), self.gammas.index(gamma)])


def baseline_rmse(dataset, kind: str, fcfg: flt.FilterConfig) -> float:
    cfg = replace(fcfg, kind=kind)
    estimates = [flt.estimate_heading_filtered(item.window, cfg) for item in dataset]
    return lrn.wrapped_rmse_deg(estimates, dataset.headings)


def run_cell(setup: BenchSetup, index: int) -> CellResult:
    g = setup.bench.gammas[index]
    try:
        cfg = replace(setup.augment, gamma_target=g)
        dataset = aug.build_dataset(cfg, setup.geo, setup.vehicle, setup.gyro_model)
        train_set, val_set, test_set = aug.split(dataset, setup.bench.split)
        result = CellResult(g, {})
        for method in setup.bench.methods:
            if method == "learner":
                fit = lrn.train(train_set, val_set, setup.train)
                result.rmse[method] = lrn.evaluate(fit.params, test_set)
                result.metrics, result.params = fit.metrics, fit.params
            else:
                result.rmse[method] = baseline_rmse(test_set, method, setup.filter)
        derived = dyn.derive(setup.vehicle)
        b = setup.bench
        spec = dyn.DisturbanceSpec(
            b.snr_mode, b.snr_axis,
            g * derived.inertia[dyn.axis_index(b.snr_axis)],
            b.snr_frequency, b.snr_phase,
        )
        model = replace(setup.gyro_model, seed=derive_seed(setup.seed, "snr"))
        series, truth = snr_series(setup.geo, model, spec, derived, b.snr_duration,
                                   cfg.sample_rate, b.snr_heading)
        result.snr = snr_vs_averaging(series, truth, b.averaging_times)
        return result
    except Exception as exc:
        raise BenchError(f"bench cell gamma={gamma_label(g)} failed: {exc}") from exc


def run_benchmark(setup: BenchSetup, jobs: int = 1) -> BenchReport:
    indices = range(len(setup.bench.gammas))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(run_cell, [setup] * len(indices), indices))
    else:
        cells = [run_cell(setup, i) for i in indices]
    methods = tuple(setup.bench.methods)
    gammas = tuple(setup.bench.gammas)
    rmse = np.array([[cell.rmse[m] for cell in cells] for m in methods])
    return BenchReport(
        gammas,
        methods,
        rmse,
        {cell.gamma: cell.snr for cell in cells},
        {cell.gamma: cell.metrics for cell in cells if cell.params is not None},
        {cell.gamma: cell.params for cell in cells if cell.params is not None},
        {"config_sha256": setup.digest(), "config": setup.describe()},
    )


# --------------------------------------------------------------------------
# report files
# --------------------------------------------------------------------------

def _g(x: float) -> str:
    return f"{x:.17g}"


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def table2_csv(report: BenchReport) -> str:
    rows = [["method"] + [gamma_label(g) for g in report.gammas]]
    for i, m in enumerate(report.methods):
        rows.append([m] + [_g(v) for v in report.rmse_deg[i]])
    return _csv(rows)


def snr_csv(report: BenchReport) -> str:
    rows = [["gamma", "averaging_time_s", "snr_db"]]
    for g in report.gammas:
        for t, s in report.snr_curves[g]:
            rows.append([_g(g), _g(t), _g(s)])
    return _csv(rows)


def loss_curves_csv(report: BenchReport) -> str:
    rows = [["gamma", "epoch", "train_loss", "val_rmse_deg"]]
    for g, metrics in report.loss_curves.items():
        for epoch, loss_value, val in metrics:
            rows.append([_g(g), epoch, _g(loss_value), _g(val)])
    return _csv(rows)


def checkpoint_name(g: float) -> str:
    return "checkpoint_nd.json" if g == 0 else f"checkpoint_gamma_{g:g}.json"


def write_report(report: BenchReport, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "table2.csv": table2_csv(report),
        "snr.csv": snr_csv(report),
        "loss_curves.csv": loss_curves_csv(report),
    }
    doc = {
        "gammas": list(report.gammas),
        "gamma_labels": [gamma_label(g) for g in report.gammas],
        "methods": list(report.methods),
        "method_labels": [METHOD_LABELS[m] for m in report.methods],
        "rmse_deg": report.rmse_deg.tolist(),
        "snr_curves": {gamma_label(g): c.tolist() for g, c in report.snr_curves.items()},
        "loss_curves": {gamma_label(g): [list(r) for r in m]
                        for g, m in report.loss_curves.items()},
        "checkpoints": {gamma_label(g): checkpoint_name(g) for g in report.checkpoints},
        "provenance": report.provenance,
    }
    files["report.json"] = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        written.append(path)
    for g, params in report.checkpoints.items():
        written.append(lrn.save_params(params, out / checkpoint_name(g)))
    return written
