"""
Classical denoising baselines: FIR low-pass, Savitzky-Golay, Wiener and
wavelet shrinkage.

Every filter works on each axis independently, pads by reflection so the
output has the input's length, and is followed (in
:func:`estimate_heading_filtered`) by a window average and the levelled
gyrocompass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pywt
from scipy import signal

from .frames import BodyRates, gyrocompass_leveled
from .gyro import RateSeries

KINDS = ("fir", "savitzky_golay", "wiener", "wavelet")


class FilterInputError(ValueError):
    """Series too short for the filter support."""


@dataclass(frozen=True)
class FilterConfig:
    kind: str = "fir"
    fir_taps: int = 101
    fir_cutoff: float = 2.5  # Hz; 0.05 * Nyquist at 100 Hz
    sg_window: int = 51
    sg_order: int = 3
    wiener_segment: int = 8
    wavelet_levels: int = 4
    wavelet: str = "db4"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; expected one of {KINDS}")
        if self.fir_taps < 1 or self.fir_taps % 2 == 0:
            raise ValueError("fir_taps must be a positive odd integer")
        if not self.fir_cutoff > 0:
            raise ValueError("fir_cutoff must be positive")
        if self.sg_window < 1 or self.sg_window % 2 == 0:
            raise ValueError("sg_window must be a positive odd integer")
        if not 0 <= self.sg_order < self.sg_window:
            raise ValueError("sg_order must be smaller than sg_window")
        if self.wiener_segment < 1:
            raise ValueError("wiener_segment must be >= 1")
        if self.wavelet_levels < 1:
            raise ValueError("wavelet_levels must be >= 1")

    def support(self) -> int:
        """Minimum number of samples the filter accepts."""
        if self.kind == "fir":
            return self.fir_taps
        if self.kind == "savitzky_golay":
            return self.sg_window
        if self.kind == "wiener":
            return 2 * self.wiener_segment
        return pywt.Wavelet(self.wavelet).dec_len * 2**self.wavelet_levels

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fir_taps(cfg: FilterConfig, sample_rate: float) -> np.ndarray:
    """Hamming-windowed sinc low-pass, normalised to unit DC gain."""
    if not cfg.fir_cutoff < sample_rate / 2:
        raise ValueError("fir_cutoff must be below the Nyquist frequency")
    taps = signal.firwin(cfg.fir_taps, cfg.fir_cutoff, window="hamming", fs=sample_rate)
    return taps / taps.sum()


def _reflect(x: np.ndarray, pad: int) -> np.ndarray:
    # np.pad 'reflect' needs pad < len; fall back to symmetric repetition beyond that
    mode = "reflect" if pad < len(x) else "symmetric"
    return np.pad(x, pad, mode=mode)


def fir_filter(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    half = len(taps) // 2
    return np.convolve(_reflect(x, half), taps, mode="valid")


def savgol(x: np.ndarray, window: int, order: int) -> np.ndarray:
    return signal.savgol_filter(x, window, order, mode="mirror")


def wiener_gain(x: np.ndarray, segments: int = 8) -> np.ndarray:
    """Frequency-domain Wiener gain on the ``rfft`` grid of the padded signal.

    The input PSD is a Welch estimate over ``segments`` half-overlapping
    segments; the noise level is the median PSD over the highest octave.
    """
    n = len(x)
    nperseg = max(2, (2 * n) // (segments + 1))
    freqs, psd = signal.welch(x, nperseg=nperseg, noverlap=nperseg // 2, detrend=False)
    top = psd[freqs >= 0.25]
    noise = float(np.median(top)) if top.size else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(psd > 0, np.clip(psd - noise, 0.0, None) / psd, 1.0)
    if noise == 0.0:
        gain = np.ones_like(psd)
    grid = np.fft.rfftfreq(_padded_length(n))
    return np.interp(grid, freqs, gain)


def _padded_length(n: int) -> int:
    return n + 2 * (n // 2)


def apply_gain(x: np.ndarray, gain: np.ndarray) -> np.ndarray:
    """Zero-phase filtering with a real gain on the reflected, padded signal."""
    n = len(x)
    pad = n // 2
    padded = _reflect(x, pad)
    out = np.fft.irfft(np.fft.rfft(padded) * gain, n=len(padded))
    return out[pad:pad + n]


def wiener_filter(x: np.ndarray, segments: int = 8) -> np.ndarray:
    return apply_gain(x, wiener_gain(x, segments))


def wavelet_threshold(x: np.ndarray, wavelet: str = "db4", levels: int = 4) -> float:
    """Universal threshold ``sigma * sqrt(2 ln N)``, sigma from the finest-band MAD."""
    finest = pywt.wavedec(x, wavelet, level=1, mode="symmetric")[-1]
    sigma = float(np.median(np.abs(finest))) / 0.6745
    return sigma * math.sqrt(2.0 * math.log(len(x)))


def wavelet_denoise(x: np.ndarray, wavelet: str = "db4", levels: int = 4,
                    threshold: float = None) -> np.ndarray:
    """Soft-threshold wavelet shrinkage of all detail bands.

    With ``threshold=0`` the transform round trip is a linear (identity) map.
    """
    if threshold is None:
        threshold = wavelet_threshold(x, wavelet, levels)
    coeffs = pywt.wavedec(x, wavelet, level=levels, mode="symmetric")
    if threshold > 0:
        coeffs = [coeffs[0]] + [pywt.threshold(c, threshold, mode="soft") for c in coeffs[1:]]
    return pywt.waverec(coeffs, wavelet, mode="symmetric")[: len(x)]


def denoise_array(x: np.ndarray, cfg: FilterConfig, sample_rate: float) -> np.ndarray:
    """Filter a 1-D array."""
    if len(x) < cfg.support():
        raise FilterInputError(
            f"{cfg.kind} needs at least {cfg.support()} samples, got {len(x)}"
        )
    if cfg.kind == "fir":
        return fir_filter(x, fir_taps(cfg, sample_rate))
    if cfg.kind == "savitzky_golay":
        return savgol(x, cfg.sg_window, cfg.sg_order)
    if cfg.kind == "wiener":
        return wiener_filter(x, cfg.wiener_segment)
    return wavelet_denoise(x, cfg.wavelet, cfg.wavelet_levels)


def denoise(series: RateSeries, cfg: FilterConfig) -> RateSeries:
    out = np.column_stack([
        denoise_array(series.samples[:, k], cfg, series.sample_rate) for k in range(3)
    ])
    return series.with_samples(out)


def estimate_heading_filtered(series: RateSeries, cfg: FilterConfig) -> float:
    """Denoise, average over the window, then apply the levelled gyrocompass."""
    mean = denoise(series, cfg).mean_rates()
    return gyrocompass_leveled(BodyRates(mean[0], mean[1], mean[2]))
