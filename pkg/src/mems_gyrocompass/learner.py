"""
Compact window-to-heading regressor with hand-written backpropagation.

Pipeline for one window of ``(p, q)`` samples:

1. per-axis standardisation with train-split mean/std (fixed),
2. mean pooling into ``segments`` equal time segments per axis (fixed),
3. whitening of the pooled vector with train-split statistics (fixed),
4. two 1-D convolution kernels per axis over the segment sequence,
5. dense layer with ``tanh``,
6. dense layer producing ``(sin_hat, cos_hat)``.

Stages 1-3 are constants estimated once from the training split; stages 4-6
are trained by plain mini-batch gradient descent on the squared error
against ``(sin(psi), cos(psi))``. The heading is decoded with ``atan2``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .frames import wrap_angle
from .seeding import derive_seed

CHECKPOINT_FORMAT = "mems-gyrocompass-regressor"
CHECKPOINT_VERSION = 1
TRAINABLE = ("conv_w", "conv_b", "w1", "b1", "w2", "b2")
_FIXED_ARRAYS = ("in_mean", "in_std", "feat_mean", "whiten")
_DECAYED = ("conv_w", "w1", "w2")
N_CHANNELS = 2
N_KERNELS = 2


class TrainingError(RuntimeError):
    pass


class CheckpointError(ValueError):
    """Checkpoint file is malformed or fails its integrity check."""


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 0.02
    seed: int = 0
    early_stop_patience: int = 40
    hidden: int = 40
    segments: int = 60
    kernel_size: int = 5
    whitening_floor: float = 1e-4  # relative to the largest eigenvalue
    weight_decay: float = 0.03

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if self.kernel_size < 1 or self.kernel_size > self.segments:
            raise ValueError("kernel_size must lie in [1, segments]")


@dataclass(eq=False)
class RegressorParams:
    input_length: int
    segments: int
    in_mean: np.ndarray
    in_std: np.ndarray
    feat_mean: np.ndarray
    whiten: np.ndarray
    conv_w: np.ndarray  # (channels, kernels, kernel_size)
    conv_b: np.ndarray  # (channels, kernels)
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    activation: str = field(default="tanh")

    @property
    def parameter_count(self) -> int:
        return sum(getattr(self, name).size for name in TRAINABLE)

    def trainable(self) -> dict:
        return {name: getattr(self, name) for name in TRAINABLE}

    def copy(self) -> "RegressorParams":
        arrays = {name: getattr(self, name).copy() for name in TRAINABLE + _FIXED_ARRAYS}
        return replace(self, **arrays)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(getattr(self, n))) for n in TRAINABLE + _FIXED_ARRAYS)


# --------------------------------------------------------------------------
# fixed front end
# --------------------------------------------------------------------------

def _segment_edges(length: int, segments: int) -> np.ndarray:
    return np.linspace(0, length, segments + 1).round().astype(int)


def pool(windows: np.ndarray, segments: int) -> np.ndarray:
    """Segment means of ``(n, length, channels)`` windows -> ``(n, channels * segments)``."""
    edges = _segment_edges(windows.shape[1], segments)
    sums = np.add.reduceat(windows, edges[:-1], axis=1)
    means = sums / np.diff(edges)[None, :, None]
    return means.transpose(0, 2, 1).reshape(windows.shape[0], -1)


def _as_windows(windows) -> np.ndarray:
    arr = np.asarray(windows, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    return arr[:, :, :N_CHANNELS]


def features(params: RegressorParams, windows) -> np.ndarray:
    """Whitened pooled features of raw ``(n, length, 3)`` windows."""
    arr = _as_windows(windows)
    if arr.shape[1] != params.input_length:
        raise ShapeError(
            f"window length {arr.shape[1]} does not match the configured {params.input_length}"
        )
    std = (arr - params.in_mean) / params.in_std
    pooled = pool(std, params.segments)
    return (pooled - params.feat_mean) @ params.whiten.T


def _whitening(pooled: np.ndarray, floor: float) -> tuple:
    mean = pooled.mean(axis=0)
    centered = pooled - mean
    cov = centered.T @ centered / max(len(pooled), 1)
    evals, evecs = np.linalg.eigh(cov)
    top = evals.max() if evals.size else 0.0
    if not top > 0:
        return mean, np.eye(pooled.shape[1])
    evals = np.clip(evals, 0.0, None) + floor * top
    return mean, (evecs / np.sqrt(evals)) @ evecs.T


def init_params(train_windows, cfg: TrainConfig, zero: bool = False) -> RegressorParams:
    """Fit the fixed stages to the training windows and draw initial weights."""
    arr = _as_windows(train_windows)
    length = arr.shape[1]
    if cfg.segments > length:
        raise ValueError("more segments than samples")
    flat = arr.reshape(-1, N_CHANNELS)
    in_mean = flat.mean(axis=0)
    in_std = flat.std(axis=0)
    in_std = np.where(in_std > 0, in_std, 1.0)
    pooled = pool((arr - in_mean) / in_std, cfg.segments)
    feat_mean, whiten = _whitening(pooled, cfg.whitening_floor)

    conv_out = N_CHANNELS * N_KERNELS * (cfg.segments - cfg.kernel_size + 1)
    shapes = {
        "conv_w": (N_CHANNELS, N_KERNELS, cfg.kernel_size),
        "conv_b": (N_CHANNELS, N_KERNELS),
        "w1": (cfg.hidden, conv_out),
        "b1": (cfg.hidden,),
        "w2": (2, cfg.hidden),
        "b2": (2,),
    }
    if zero:
        weights = {name: np.zeros(shape) for name, shape in shapes.items()}
    else:
        rng = np.random.default_rng(derive_seed(cfg.seed, "init"))
        conv_w = 0.1 * rng.standard_normal(shapes["conv_w"])
        conv_w[:, 0, cfg.kernel_size // 2] += 1.0
        weights = {
            "conv_w": conv_w,
            "conv_b": np.zeros(shapes["conv_b"]),
            "w1": rng.standard_normal(shapes["w1"]) / math.sqrt(conv_out),
            "b1": np.zeros(shapes["b1"]),
            "w2": rng.standard_normal(shapes["w2"]) / math.sqrt(cfg.hidden),
            "b2": np.zeros(2),
        }
    return RegressorParams(length, cfg.segments, in_mean, in_std, feat_mean, whiten,
                           **weights)


# --------------------------------------------------------------------------
# trainable network
# --------------------------------------------------------------------------

def _network(params: RegressorParams, feats: np.ndarray):
    n = feats.shape[0]
    x = feats.reshape(n, N_CHANNELS, params.segments)
    patches = sliding_window_view(x, params.conv_w.shape[2], axis=2)  # (n, c, t, k)
    conv = np.einsum("bctj,ckj->bckt", patches, params.conv_w) + params.conv_b[None, :, :, None]
    a = conv.reshape(n, -1)
    h = np.tanh(a @ params.w1.T + params.b1)
    y = h @ params.w2.T + params.b2
    return y, (patches, a, h)


def forward_features(params: RegressorParams, feats: np.ndarray) -> np.ndarray:
    return _network(params, feats)[0]


def forward(params: RegressorParams, window) -> np.ndarray:
    """``(sin_hat, cos_hat)`` for one window (or ``(n, 2)`` for a batch)."""
    samples = getattr(window, "samples", window)
    single = np.ndim(samples) == 2
    y = forward_features(params, features(params, samples))
    return y[0] if single else y


def targets(headings) -> np.ndarray:
    h = np.asarray(headings, dtype=float)
    return np.stack([np.sin(h), np.cos(h)], axis=-1)


def loss(pred, label: float) -> float:
    """Squared error between ``pred`` and ``(sin(label), cos(label))``."""
    pred = np.asarray(pred, dtype=float)
    return float(np.sum((pred - targets(label)) ** 2))


def loss_grad(pred, label: float) -> np.ndarray:
    return 2.0 * (np.asarray(pred, dtype=float) - targets(label))


def batch_loss_and_grads(params: RegressorParams, feats: np.ndarray, headings):
    """Mean per-item loss over a batch and its gradient for every trainable array."""
    y, (patches, a, h) = _network(params, feats)
    diff = y - targets(headings)
    n = feats.shape[0]
    value = float(np.sum(diff**2) / n)
    dy = 2.0 * diff / n
    grads = {"w2": dy.T @ h, "b2": dy.sum(axis=0)}
    dz = (dy @ params.w2) * (1.0 - h**2)
    grads["w1"] = dz.T @ a
    grads["b1"] = dz.sum(axis=0)
    da = (dz @ params.w1).reshape(n, N_CHANNELS, N_KERNELS, -1)
    grads["conv_w"] = np.einsum("bckt,bctj->ckj", da, patches)
    grads["conv_b"] = da.sum(axis=(0, 3))
    return value, grads


def decode(pred: np.ndarray) -> np.ndarray:
    pred = np.atleast_2d(pred)
    return wrap_angle(np.arctan2(pred[:, 0], pred[:, 1]))


def predict_headings(params: RegressorParams, windows) -> np.ndarray:
    return decode(forward_features(params, features(params, windows)))


def wrapped_rmse_deg(estimates, labels) -> float:
    err = wrap_angle(np.asarray(estimates, dtype=float) - np.asarray(labels, dtype=float))
    return math.degrees(math.sqrt(np.mean(np.square(err))))


def evaluate(params: RegressorParams, dataset) -> float:
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty split")
    return wrapped_rmse_deg(predict_headings(params, dataset.windows), dataset.headings)


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------

@dataclass
class TrainResult:
    params: RegressorParams
    metrics: list  # (epoch, train_loss, val_rmse_deg)
    best_epoch: int


def train(train_set, validation_set, cfg: TrainConfig, params: RegressorParams = None):
    """Mini-batch gradient descent; returns the parameters with the best validation RMSE."""
    if len(train_set) == 0 or len(validation_set) == 0:
        raise ValueError("train and validation splits must be nonempty")
    if params is None:
        params = init_params(train_set.windows, cfg)
    params = params.copy()
    f_train = features(params, train_set.windows)
    f_val = features(params, validation_set.windows)
    y_train = np.asarray(train_set.headings, dtype=float)
    rng = np.random.default_rng(derive_seed(cfg.seed, "batches"))

    best = params.copy()
    best_rmse = wrapped_rmse_deg(decode(forward_features(params, f_val)),
                                 validation_set.headings)
    best_epoch, stale = 0, 0
    metrics = []
    n = len(f_train)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = batch_loss_and_grads(params, f_train[idx], y_train[idx])
            for name, g in grads.items():
                arr = getattr(params, name)
                if cfg.weight_decay and name in _DECAYED:
                    g = g + cfg.weight_decay * arr
                arr -= cfg.learning_rate * g
        train_loss, _ = batch_loss_and_grads(params, f_train, y_train)
        val_rmse = wrapped_rmse_deg(decode(forward_features(params, f_val)),
                                    validation_set.headings)
        if not (math.isfinite(train_loss) and math.isfinite(val_rmse)):
            raise TrainingError(f"training diverged at epoch {epoch} (loss={train_loss})")
        metrics.append((epoch, train_loss, val_rmse))
        if val_rmse < best_rmse:
            best, best_rmse, best_epoch, stale = params.copy(), val_rmse, epoch, 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break
    return TrainResult(best, metrics, best_epoch)


def metrics_csv(metrics) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "train_loss", "val_rmse_deg"])
    for epoch, train_loss, val in metrics:
        writer.writerow([epoch, f"{train_loss:.17g}", f"{val:.17g}"])
    return buf.getvalue()


# --------------------------------------------------------------------------
# checkpoint
# --------------------------------------------------------------------------

def _payload(params: RegressorParams) -> dict:
    arrays = {}
    for name in _FIXED_ARRAYS + TRAINABLE:
        arr = np.asarray(getattr(params, name), dtype=float)
        arrays[name] = {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}
    return {
        "input_length": int(params.input_length),
        "segments": int(params.segments),
        "activation": params.activation,
        "arrays": arrays,
    }


def _digest(payload: dict) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_params(params: RegressorParams, path) -> Path:
    payload = _payload(params)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "sha256": _digest(payload),
        "payload": payload,
    }
    path = Path(path)
    path.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
    return path


def load_params(path) -> RegressorParams:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing checkpoint: {path}")
    try:
        doc = json.loads(path.read_text())
        payload = doc["payload"]
        fmt, version, digest = doc["format"], doc["version"], doc["sha256"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from None
    if fmt != CHECKPOINT_FORMAT or version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format {fmt!r} v{version!r}")
    if _digest(payload) != digest:
        raise CheckpointError(f"{path}: integrity check failed (sha256 mismatch)")
    arrays = {}
    for name, entry in payload["arrays"].items():
        arrays[name] = np.array(entry["data"], dtype=float).reshape(entry["shape"])
    return RegressorParams(payload["input_length"], payload["segments"],
                           activation=payload["activation"], **arrays)
