"""Shared test oracles."""

import numpy as np

from mems_gyrocompass import learner as lrn


def numerical_gradients(params, feats, headings, eps=1e-6):
    """Central finite differences of the batch loss for every trainable array."""
    grads = {}
    for name in lrn.TRAINABLE:
        arr = getattr(params, name)
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            plus, _ = lrn.batch_loss_and_grads(params, feats, headings)
            arr[idx] = old - eps
            minus, _ = lrn.batch_loss_and_grads(params, feats, headings)
            arr[idx] = old
            g[idx] = (plus - minus) / (2 * eps)
        grads[name] = g
    return grads


def relative_error(a, b) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / scale)


def brute_force_rmse_deg(estimates, labels) -> float:
    total = 0.0
    for e, l in zip(estimates, labels):
        d = (e - l) % (2 * np.pi)
        if d >= np.pi:
            d -= 2 * np.pi
        total += d * d
    return float(np.degrees(np.sqrt(total / len(labels))))
