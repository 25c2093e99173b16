import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage, signal

from mems_gyrocompass import filters as flt
from mems_gyrocompass.gyro import RateSeries

FS = 100.0


def noisy(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / FS
    return np.sin(2 * math.pi * 0.3 * t) + 0.5 * rng.standard_normal(n)


def test_config_validation():
    for bad in (dict(kind="kalman"), dict(fir_taps=100), dict(sg_window=50),
                dict(sg_order=51), dict(fir_cutoff=0.0), dict(wavelet_levels=0)):
        with pytest.raises(ValueError):
            flt.FilterConfig(**bad)


def test_fir_taps_unit_dc_gain_and_symmetry():
    taps = flt.fir_taps(flt.FilterConfig(), FS)
    assert abs(taps.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(taps, taps[::-1])
    with pytest.raises(ValueError):
        flt.fir_taps(flt.FilterConfig(fir_cutoff=60.0), FS)


def test_fir_matches_ndimage_mirror_convolution():
    x = noisy()
    taps = flt.fir_taps(flt.FilterConfig(), FS)
    oracle = ndimage.convolve1d(x, taps, mode="mirror")
    np.testing.assert_allclose(flt.fir_filter(x, taps), oracle, atol=1e-13)


def test_savgol_interior_matches_local_polyfit():
    x = noisy(400)
    out = flt.savgol(x, 21, 3)
    k = np.arange(-10, 11)
    for i in (50, 200, 333):
        coef = np.polyfit(k, x[i - 10:i + 11], 3)
        assert out[i] == pytest.approx(np.polyval(coef, 0), abs=1e-10)


@pytest.mark.parametrize("kind", flt.KINDS)
def test_constant_preserved(kind):
    cfg = flt.FilterConfig(kind=kind)
    x = np.full(1000, 3.7e-5)
    np.testing.assert_allclose(flt.denoise_array(x, cfg, FS), x, rtol=0, atol=1e-10 * 3.7e-5)


@pytest.mark.parametrize("kind", flt.KINDS)
def test_output_length_and_noise_reduction(kind):
    rng = np.random.default_rng(1)
    clean = np.sin(2 * math.pi * 0.2 * np.arange(3000) / FS)
    x = clean + 0.3 * rng.standard_normal(3000)
    out = flt.denoise_array(x, flt.FilterConfig(kind=kind), FS)
    assert out.shape == x.shape
    assert np.std(out - clean) < 0.6 * np.std(x - clean)


@pytest.mark.parametrize("kind", flt.KINDS)
def test_short_input_rejected(kind):
    cfg = flt.FilterConfig(kind=kind)
    with pytest.raises(flt.FilterInputError):
        flt.denoise_array(np.zeros(cfg.support() - 1), cfg, FS)


def test_wiener_gain_bounds():
    g = flt.wiener_gain(noisy())
    assert np.all(g >= 0) and np.all(g <= 1)
    assert g[0] > 0.9 and np.median(g[len(g) // 2:]) < 0.2


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_fixed_gain_wiener_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(512), rng.standard_normal(512)
    gain = flt.wiener_gain(x)
    lhs = flt.apply_gain(a * x + b * y, gain)
    rhs = a * flt.apply_gain(x, gain) + b * flt.apply_gain(y, gain)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_unthresholded_wavelet_is_linear_identity(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(500), rng.standard_normal(500)
    lhs = flt.wavelet_denoise(a * x + b * y, threshold=0.0)
    np.testing.assert_allclose(lhs, a * x + b * y, atol=1e-10)


def test_linear_filters_are_linear():
    rng = np.random.default_rng(5)
    x, y = rng.standard_normal(800), rng.standard_normal(800)
    for kind in ("fir", "savitzky_golay"):
        cfg = flt.FilterConfig(kind=kind)
        lhs = flt.denoise_array(2 * x - 3 * y, cfg, FS)
        rhs = 2 * flt.denoise_array(x, cfg, FS) - 3 * flt.denoise_array(y, cfg, FS)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_denoise_series_and_heading():
    omega_n = 6e-5
    truth = np.array([omega_n * math.cos(1.0), -omega_n * math.sin(1.0), -4e-5])
    rng = np.random.default_rng(3)
    series = RateSeries(FS, truth + 1e-7 * rng.standard_normal((3000, 3)))
    for kind in flt.KINDS:
        cfg = flt.FilterConfig(kind=kind)
        assert flt.denoise(series, cfg).samples.shape == (3000, 3)
        assert flt.estimate_heading_filtered(series, cfg) == pytest.approx(1.0, abs=1e-2)


def test_savgol_dc_gain_from_coefficients():
    coeffs = signal.savgol_coeffs(51, 3)
    assert abs(coeffs.sum() - 1.0) < 1e-10


def test_fir_reduces_white_noise_variance():
    x = np.random.default_rng(7).standard_normal(5000)
    out = flt.denoise_array(x, flt.FilterConfig(kind="fir"), FS)
    assert out.var() < 0.2 * x.var()


def test_full_order_savgol_is_identity_in_interior():
    x = np.random.default_rng(8).standard_normal(200)
    out = flt.savgol(x, 11, 10)
    np.testing.assert_allclose(out[5:-5], x[5:-5], atol=1e-8)


def noise_free_series(heading_deg, n=3000):
    from mems_gyrocompass.frames import EulerAngles, GeoConfig
    from mems_gyrocompass.gyro import stationary_truth
    return stationary_truth(GeoConfig(), EulerAngles(yaw=math.radians(heading_deg)), n / FS, FS)


@pytest.mark.parametrize("kind", flt.KINDS)
def test_noise_free_heading(kind):
    est = flt.estimate_heading_filtered(noise_free_series(30.0), flt.FilterConfig(kind=kind))
    assert math.degrees(est) == pytest.approx(30.0, abs=1e-6)


@pytest.mark.parametrize("kind", flt.KINDS)
def test_pure_noise_heading_is_finite(kind):
    series = RateSeries(FS, np.random.default_rng(9).standard_normal((1000, 3)))
    assert math.isfinite(flt.estimate_heading_filtered(series, flt.FilterConfig(kind=kind)))


@pytest.mark.parametrize("kind", flt.KINDS)
def test_high_snr_heading_error_below_one_degree(kind):
    # per-sample SNR above 20 dB: noise std at 1/10 of the horizontal rate
    truth = noise_free_series(-75.0)
    sigma = 0.1 * 6.18e-5
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(20):
        series = truth.with_samples(truth.samples + sigma * rng.standard_normal(truth.samples.shape))
        est = flt.estimate_heading_filtered(series, flt.FilterConfig(kind=kind))
        worst = max(worst, abs(math.degrees(math.remainder(est - math.radians(-75.0), 2 * math.pi))))
    assert worst < 1.0
