import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from mems_gyrocompass import dynamics as dyn

DERIVED = dyn.derive(dyn.VehicleParams())


def test_derived_values_default_vehicle():
    # solid cylinder m=50, r=0.15, l=1.5; righting arm 0.1 m on 490.5 N
    np.testing.assert_allclose(DERIVED.inertia, [0.5625, 9.65625, 9.65625], rtol=1e-14)
    np.testing.assert_allclose(DERIVED.restoring, [49.05, 49.05, 0.0], rtol=1e-14)
    np.testing.assert_allclose(DERIVED.natural_frequency[:2],
                               [math.sqrt(49.05 / 0.5625), math.sqrt(49.05 / 9.65625)])
    np.testing.assert_allclose(DERIVED.damping_ratio[:2], 0.2, atol=1e-4)
    assert DERIVED.natural_frequency[2] == 0 and math.isinf(DERIVED.damping_ratio[2])


def test_vehicle_validation():
    with pytest.raises(ValueError):
        dyn.VehicleParams(buoyancy=400.0)
    with pytest.raises(ValueError):
        dyn.VehicleParams(z_gravity=0.1, z_buoyancy=0.05)
    with pytest.raises(ValueError):
        dyn.VehicleParams(damping=[-1.0, 1.0, 1.0])
    with pytest.raises(dyn.StabilityError):
        dyn.derive(dyn.VehicleParams(z_gravity=1.0, z_buoyancy=1.01, buoyancy=470.0))


def test_mass_matrix_and_restoring_linearisation():
    p = dyn.VehicleParams()
    m = dyn.mass_inertia_matrix(p)
    np.testing.assert_allclose(m, m.T)
    assert np.all(np.linalg.eigvalsh(m) > 0)
    h = 1e-6
    d_roll = (dyn.restoring_vector(p, h, 0)[3] - dyn.restoring_vector(p, -h, 0)[3]) / (2 * h)
    d_pitch = (dyn.restoring_vector(p, 0, h)[4] - dyn.restoring_vector(p, 0, -h)[4]) / (2 * h)
    assert d_roll == pytest.approx(DERIVED.restoring[0], rel=1e-9)
    assert d_pitch == pytest.approx(DERIVED.restoring[1], rel=1e-9)


def test_spec_validation_and_gamma():
    with pytest.raises(ValueError):
        dyn.DisturbanceSpec("ramp")
    with pytest.raises(ValueError):
        dyn.DisturbanceSpec("step", "heave")
    with pytest.raises(ValueError):
        dyn.DisturbanceSpec("sinusoid", "roll", 1.0, 0.0)
    with pytest.raises(ValueError):
        dyn.DisturbanceSpec("step", "roll", -1.0)
    spec = dyn.DisturbanceSpec("step", "pitch", 9.65625)
    assert dyn.gamma(spec, DERIVED) == pytest.approx(1.0)
    assert spec.scaled(2.0).amplitude == pytest.approx(2 * 9.65625)


def test_frequency_response_standard_form():
    i = 0
    w0, z, inertia = DERIVED.natural_frequency[i], DERIVED.damping_ratio[i], DERIVED.inertia[i]
    at_resonance = dyn.frequency_response(DERIVED, "roll", w0)
    assert abs(at_resonance) == pytest.approx(1.0 / (2 * z * inertia * w0**2), rel=1e-12)
    assert abs(dyn.frequency_response(DERIVED, "roll", 0.0)) == pytest.approx(1 / 49.05)
    sys = signal.TransferFunction([1.0], [inertia, DERIVED.damping[i], DERIVED.restoring[i]])
    for w in (0.3, 2.0, 15.0):
        _, h = signal.freqresp(sys, [w])
        assert dyn.frequency_response(DERIVED, 0, w) == pytest.approx(complex(h[0]), rel=1e-12)


@pytest.mark.parametrize("mode", dyn.MODES)
@pytest.mark.parametrize("axis", dyn.AXES)
def test_analytic_matches_rk4(mode, axis):
    spec = dyn.DisturbanceSpec(mode, axis, 0.3, 1.7, 0.4, onset=0.123)
    a = dyn.respond_analytic(DERIVED, spec, 20.0, 100.0)
    n = dyn.respond_numeric(DERIVED, spec, 20.0, 100.0)
    assert np.max(np.abs(a.angle - n.angle)) < 1e-9
    assert np.max(np.abs(a.rate - n.rate)) < 1e-8
    assert np.all(a.angle[a.times < 0.123] == 0)


@pytest.mark.parametrize("mode", dyn.MODES)
def test_undamped_yaw_integrator(mode):
    derived = dyn.derive(dyn.VehicleParams(damping=[2.1011, 8.7051, 0.0]))
    spec = dyn.DisturbanceSpec(mode, "yaw", 0.5, 2.0, 0.3)
    a = dyn.respond_analytic(derived, spec, 10.0, 100.0)
    n = dyn.respond_numeric(derived, spec, 10.0, 100.0)
    np.testing.assert_allclose(a.angle, n.angle, atol=1e-9)
    np.testing.assert_allclose(a.rate, n.rate, atol=1e-9)


def test_sinusoid_matches_lsim():
    spec = dyn.DisturbanceSpec("sinusoid", "pitch", 2.0, 1.3, 0.7)
    resp = dyn.respond_analytic(DERIVED, spec, 30.0, 100.0)
    sys = signal.lti([1.0], [DERIVED.inertia[1], DERIVED.damping[1], DERIVED.restoring[1]])
    t = resp.times
    _, y, _ = signal.lsim(sys, 2.0 * np.cos(1.3 * t + 0.7), t, interp=True)
    # lsim uses piecewise-linear input, so agreement is limited by the sampling
    np.testing.assert_allclose(resp.angle[:, 1], y, atol=1e-6)


def test_impulse_matches_scipy():
    resp = dyn.respond_analytic(DERIVED, dyn.DisturbanceSpec("impulse", "roll", 0.2), 5.0, 100.0)
    sys = signal.lti([1.0], [DERIVED.inertia[0], DERIVED.damping[0], DERIVED.restoring[0]])
    _, y = signal.impulse(sys, T=resp.times)
    np.testing.assert_allclose(resp.angle[:, 0], 0.2 * y, atol=1e-12)


def test_step_settles_to_static_deflection():
    resp = dyn.respond_analytic(DERIVED, dyn.DisturbanceSpec("step", "roll", 1.0), 20.0, 100.0)
    assert resp.angle[-1, 0] == pytest.approx(1.0 / 49.05, rel=1e-9)
    assert resp.rate[-1, 0] == pytest.approx(0.0, abs=1e-12)


def test_sinusoid_steady_state_amplitude():
    w = DERIVED.natural_frequency[0]
    spec = dyn.DisturbanceSpec("sinusoid", "roll", 1.0, w, 0.0)
    resp = dyn.respond_analytic(DERIVED, spec, 30.0, 1000.0)
    tail = resp.angle[resp.times > 20, 0]
    assert np.max(np.abs(tail)) == pytest.approx(abs(dyn.frequency_response(DERIVED, 0, w)), rel=1e-4)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(dyn.MODES), st.floats(0.0, 5.0), st.floats(0.1, 5.0))
def test_linear_in_amplitude(mode, amp, freq):
    unit = dyn.respond_analytic(DERIVED, dyn.DisturbanceSpec(mode, "pitch", 1.0, freq), 5.0, 50.0)
    scaled = dyn.respond_analytic(DERIVED, dyn.DisturbanceSpec(mode, "pitch", amp, freq), 5.0, 50.0)
    np.testing.assert_allclose(scaled.angle, amp * unit.angle, rtol=1e-12, atol=1e-300)


def test_zero_amplitude_is_zero():
    resp = dyn.respond_analytic(DERIVED, dyn.DisturbanceSpec("sinusoid", "roll", 0.0, 1.0), 5.0, 100.0)
    assert not np.any(resp.angle) and not np.any(resp.rate)


def test_overdamped_rejected():
    derived = dyn.derive(dyn.VehicleParams(damping=[20.0, 8.7, 8.7]))
    with pytest.raises(dyn.UnsupportedRegimeError):
        dyn.respond_analytic(derived, dyn.DisturbanceSpec("step", "roll", 1.0), 1.0, 100.0)


def test_small_angle_warning():
    spec = dyn.DisturbanceSpec("step", "roll", 49.05)  # 1 rad static deflection
    with warnings.catch_warnings():
        warnings.simplefilter("error", dyn.SmallAngleWarning)
        with pytest.raises(dyn.SmallAngleWarning):
            dyn.respond_analytic(DERIVED, spec, 5.0, 100.0)


def test_numeric_needs_substeps():
    with pytest.raises(ValueError):
        dyn.respond_numeric(DERIVED, dyn.DisturbanceSpec("step"), 1.0, 100.0, substeps=2)


@pytest.mark.parametrize("zeta", [0.1, 0.3, 0.7])
def test_step_formula_against_transfer_function(zeta):
    w0 = 2.0
    t = np.linspace(0, 20, 2001)
    _, y = signal.step(signal.lti([w0**2], [1.0, 2 * zeta * w0, w0**2]), T=t)
    np.testing.assert_allclose(dyn.step_formula(t, zeta, w0), y, atol=1e-10)


def test_undamped_ratio_is_zero():
    derived = dyn.derive(dyn.VehicleParams(damping=[0.0, 0.0, 0.0]))
    assert derived.damping_ratio[0] == 0.0 and derived.damping_ratio[1] == 0.0


def test_undamped_impulse_conserves_energy():
    derived = dyn.derive(dyn.VehicleParams(damping=[0.0, 0.0, 0.0]))
    w0 = derived.natural_frequency[0]
    duration = 10 * 2 * math.pi / w0
    resp = dyn.respond_numeric(derived, dyn.DisturbanceSpec("impulse", "roll", 0.05), duration, 1000.0)
    inertia, stiff = derived.inertia[0], derived.restoring[0]
    energy = 0.5 * inertia * resp.rate[:, 0] ** 2 + 0.5 * stiff * resp.angle[:, 0] ** 2
    assert np.ptp(energy) / energy[0] < 1e-4
    amplitude = np.abs(resp.angle[:, 0])
    assert amplitude[-len(amplitude) // 10:].max() == pytest.approx(amplitude[:len(amplitude) // 10].max(), rel=1e-4)


def test_quasi_static_sinusoid_gain():
    w = 0.02 * DERIVED.natural_frequency[1]
    spec = dyn.DisturbanceSpec("sinusoid", "pitch", 1.0, w, 0.0)
    resp = dyn.respond_analytic(DERIVED, spec, 4 * 2 * math.pi / w, 20.0)
    tail = resp.angle[resp.times > 2 * 2 * math.pi / w, 1]
    assert np.max(np.abs(tail)) == pytest.approx(1.0 / DERIVED.restoring[1], rel=0.02)


def test_gain_limits():
    assert dyn.frequency_response(DERIVED, "pitch", 0.0) == pytest.approx(1 / 49.05)
    assert abs(dyn.frequency_response(DERIVED, "pitch", 1e6)) < 1e-12
    with pytest.raises(ValueError):
        dyn.frequency_response(DERIVED, "roll", -1.0)


def test_gamma_scaling():
    spec = dyn.DisturbanceSpec("step", "roll", 0.5625)
    assert dyn.gamma(spec, DERIVED) == pytest.approx(1.0)
    doubled = dyn.derive(dyn.VehicleParams(mass=100.0, weight=981.0, buoyancy=981.0))
    assert dyn.gamma(spec, doubled) == pytest.approx(0.5)


def test_step_steady_state_after_settling():
    for axis in (0, 1):
        settle = 10 / (DERIVED.damping_ratio[axis] * DERIVED.natural_frequency[axis])
        spec = dyn.DisturbanceSpec("step", dyn.AXES[axis], 2.0)
        resp = dyn.respond_analytic(DERIVED, spec, settle + 1.0, 100.0)
        tail = resp.angle[resp.times >= settle, axis]
        np.testing.assert_allclose(tail, 2.0 / DERIVED.restoring[axis], rtol=1e-4)


def test_impulse_envelope_at_peaks():
    resp = dyn.respond_analytic(DERIVED, dyn.DisturbanceSpec("impulse", "roll", 0.1), 3.0, 10000.0)
    x, t = resp.angle[:, 0], resp.times
    peaks, _ = signal.find_peaks(x)
    zeta, w0 = DERIVED.damping_ratio[0], DERIVED.natural_frequency[0]
    ratio = x[peaks] / x[peaks[0]]
    envelope = np.exp(-zeta * w0 * (t[peaks] - t[peaks[0]]))
    np.testing.assert_allclose(ratio, envelope, rtol=0.02)
