from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shorefault.numerics import (
    IntegrationError,
    ParameterError,
    Phasor,
    TimeSeries,
    abc_to_dq0,
    cycle_rms,
    dq0_to_abc,
    extract_phasor,
    fit_decaying_oscillation,
    integrate_step,
    moving_average,
)

DT = 50e-6
finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
angles = st.floats(-20.0, 20.0, allow_nan=False, allow_infinity=False)


def tone(duration=0.2, dt=DT, **channels):
    n = int(round(duration / dt)) + 1
    t = dt * np.arange(n)
    return t, TimeSeries(0.0, dt, {k: f(t) for k, f in channels.items()})


# ---------------------------------------------------------------- integrator
def test_integrator_single_step_exponential():
    x = integrate_step(np.array([1.0]), lambda t, x: -x, 0.0, 1e-3)
    assert x[0] == pytest.approx(0.9990005, abs=1e-6)


def _global_error(dt, t_end=0.3):
    x = np.array([1.0, 0.0])
    w = 2.0 * math.pi
    f = lambda t, y: np.array([y[1], -w * w * y[0]])  # noqa: E731
    t = 0.0
    for _ in range(int(round(t_end / dt))):
        x = integrate_step(x, f, t, dt)
        t += dt
    return abs(x[0] - math.cos(w * t_end))


def test_integrator_second_order_convergence():
    e1, e2, e3 = (_global_error(dt) for dt in (2e-3, 1e-3, 5e-4))
    assert e1 / e2 == pytest.approx(4.0, rel=0.1)
    assert e2 / e3 == pytest.approx(4.0, rel=0.1)


def test_integrator_oscillator_energy_drift():
    w = 2.0 * math.pi * 60.0
    x = np.array([1.0, 0.0])
    dt = 1e-5
    for k in range(1000):
        x = integrate_step(x, lambda t, y: np.array([y[1], -w * w * y[0]]), k * dt, dt, corrector_passes=8)
    energy = x[0] ** 2 + (x[1] / w) ** 2
    assert abs(energy - 1.0) < 1e-4


def test_integrator_rejects_non_finite_derivative():
    with pytest.raises(IntegrationError) as err:
        integrate_step(np.array([1.0, 2.0]), lambda t, x: np.array([0.0, math.inf]), 0.5, 1e-3)
    assert err.value.index == 1
    assert err.value.t == 0.5


def test_integrator_rejects_bad_step():
    with pytest.raises(ParameterError):
        integrate_step(np.array([1.0]), lambda t, x: -x, 0.0, 0.0)


# ----------------------------------------------------------------- transforms
def test_park_of_aligned_balanced_set():
    th = 0.7
    d, q, z = abc_to_dq0(math.cos(th), math.cos(th - 2 * math.pi / 3), math.cos(th + 2 * math.pi / 3), th)
    assert (d, q, z) == pytest.approx((1.0, 0.0, 0.0), abs=1e-15)


@given(angles)
def test_park_of_zero_is_zero(th):
    assert abc_to_dq0(0.0, 0.0, 0.0, th) == (0.0, 0.0, 0.0)


@settings(max_examples=300)
@given(finite, finite, finite, angles)
def test_park_round_trip(a, b, c, th):
    back = dq0_to_abc(*abc_to_dq0(a, b, c, th), th)
    scale = max(1.0, abs(a), abs(b), abs(c))
    assert np.allclose(back, (a, b, c), rtol=0, atol=1e-12 * scale)


@settings(max_examples=100)
@given(st.floats(0.1, 1e4), st.floats(-math.pi, math.pi), angles)
def test_park_phasor_convention(mag, phi, th):
    a, b, c = (mag * math.cos(th + phi - k * 2 * math.pi / 3) for k in range(3))
    d, q, _ = abc_to_dq0(a, b, c, th)
    assert complex(d, -q) == pytest.approx(mag * complex(math.cos(phi), math.sin(phi)), abs=1e-9 * mag)


# -------------------------------------------------------------- moving average
def test_moving_average_constant():
    _, ts = tone(x=lambda t: np.full_like(t, 3.25))
    ma = moving_average(ts, 1 / 60)
    assert np.allclose(ma["x"], 3.25, rtol=0, atol=1e-12)


def test_moving_average_nulls_fundamental():
    _, ts = tone(x=lambda t: np.sin(2 * math.pi * 60 * t + 0.4))
    ma = moving_average(ts, 1 / 60)
    assert np.max(np.abs(ma["x"])) < 1e-3


@pytest.mark.parametrize("b", [5.0, 27.0, 60.0])
def test_moving_average_recovers_exponential(b):
    _, ts = tone(x=lambda t: 100 * np.sin(2 * math.pi * 60 * t) + 50 * np.exp(-b * t))
    ma = moving_average(ts, 1 / 60)
    # windowed mean of the exponential: e^{-bt} sinh(x) / x with x = b w / 2
    x = b / 120.0
    exact = 50 * np.exp(-b * ma.time) * math.sinh(x) / x
    assert np.max(np.abs(ma["x"] - exact) / exact) < 0.02


def test_moving_average_time_axis_is_centered():
    _, ts = tone(x=lambda t: t)
    ma = moving_average(ts, 1 / 60)
    assert np.allclose(ma["x"], ma.time, atol=1e-12)


# --------------------------------------------------------------------- phasor
def test_phasor_pure_tone():
    _, ts = tone(x=lambda t: math.sqrt(2) * np.sin(2 * math.pi * 60 * t))
    ph = extract_phasor(ts, 60.0, 0.1, "x")
    assert ph.magnitude == pytest.approx(1.0, abs=1e-6)
    assert ph.angle == pytest.approx(-math.pi / 2, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1e4), st.floats(-3.1, 3.1), st.floats(-1e3, 1e3))
def test_phasor_rejects_offset(mag, phi, offset):
    _, ts = tone(0.05, x=lambda t: offset + math.sqrt(2) * mag * np.cos(2 * math.pi * 60 * t + phi))
    ph = extract_phasor(ts, 60.0, 0.04, "x")
    assert ph.magnitude == pytest.approx(mag, rel=1e-6)
    assert ph.complex == pytest.approx(mag * complex(math.cos(phi), math.sin(phi)), abs=1e-6 * mag)


def test_phasor_two_tone_leakage_bound():
    _, ts = tone(x=lambda t: math.sqrt(2) * np.sin(2 * math.pi * 60 * t) + 0.1 * np.sin(2 * math.pi * 22 * t))
    ph = extract_phasor(ts, 60.0, 0.1, "x")
    assert ph.magnitude == pytest.approx(1.0, rel=0.05)


def test_phasor_needs_enough_samples():
    ts = TimeSeries(0.0, 2e-3, {"x": np.zeros(100)})
    with pytest.raises(ParameterError):
        extract_phasor(ts, 60.0, 0.09, "x")


def test_cycle_rms():
    _, ts = tone(x=lambda t: 10 * np.sin(2 * math.pi * 60 * t))
    assert cycle_rms(ts, "x", 60.0, 0.1, 3) == pytest.approx(10 / math.sqrt(2), rel=1e-3)


# --------------------------------------------------------------------- fitter
def test_fit_sine_synthetic_with_noise():
    rng = np.random.default_rng(1)
    t = np.arange(0.0, 0.3, DT)
    y = 804 * np.exp(-27 * t) * np.sin(2 * math.pi * 22 * t)
    y = y + 1e-3 * 804 * rng.standard_normal(len(t))
    fit = fit_decaying_oscillation(t, y, "sine")
    assert fit.converged
    for k, v in (("a", 804.0), ("b", 27.0), ("f", 22.0)):
        assert fit[k] == pytest.approx(v, rel=0.01)


def test_fit_ripple_synthetic():
    t = np.arange(0.0, 0.3, DT)
    y = 28e3 + 410 * np.exp(-27 * t) * (1 + 0.55 * np.sin(2 * math.pi * 38 * t))
    fit = fit_decaying_oscillation(t, y, "ripple", offset=28e3)
    assert fit.converged
    for k, v in (("a", 410.0), ("b", 27.0), ("c", 0.55), ("f", 38.0)):
        assert fit[k] == pytest.approx(v, rel=0.01)
    assert fit["offset"] == 28e3


def test_fit_zero_signal():
    t = np.arange(0.0, 0.1, DT)
    fit = fit_decaying_oscillation(t, np.zeros_like(t), "sine")
    assert fit["a"] == 0.0 and fit.residual_norm == 0.0


@settings(max_examples=15, deadline=None)
@given(st.floats(100, 2000), st.floats(10, 80), st.floats(12, 45))
def test_fit_sine_recovers_generating_coefficients(a, b, f):
    t = np.arange(0.0, 0.3, 2e-4)
    y = a * np.exp(-b * t) * np.sin(2 * math.pi * f * t)
    fit = fit_decaying_oscillation(t, y, "sine")
    assert fit["a"] == pytest.approx(a, rel=0.01)
    assert fit["b"] == pytest.approx(b, rel=0.01)
    assert fit["f"] == pytest.approx(f, rel=0.01)


def test_fit_through_moving_average_window():
    # the fitter compares the model after the same window that filtered the data
    _, ts = tone(0.4, x=lambda t: 800 * np.exp(-27 * t) * np.sin(2 * math.pi * 22 * t))
    ma = moving_average(ts, 1 / 60)
    sel = ma.time < 0.3
    fit = fit_decaying_oscillation(ma.time[sel], ma["x"][sel], "sine", window=1 / 60)
    assert fit["a"] == pytest.approx(800, rel=0.01)
    assert fit["b"] == pytest.approx(27, rel=0.01)
    assert fit["f"] == pytest.approx(22, rel=0.01)


def test_fit_needs_samples():
    with pytest.raises(ParameterError):
        fit_decaying_oscillation(np.arange(5.0), np.ones(5), "sine")


# ---------------------------------------------------------------------- records
def test_timeseries_validation():
    with pytest.raises(ParameterError):
        TimeSeries(0.0, 0.0, {"x": np.zeros(3)})
    with pytest.raises(ParameterError):
        TimeSeries(0.0, 1.0, {"x": np.zeros(3), "y": np.zeros(4)})


def test_timeseries_window_inclusive():
    ts = TimeSeries(0.0, 0.1, {"x": np.arange(11.0)})
    w = ts.window(0.2, 0.5)
    assert list(w["x"]) == [2.0, 3.0, 4.0, 5.0]
    assert w.t0 == pytest.approx(0.2)


def test_phasor_validation():
    with pytest.raises(ParameterError):
        Phasor(-1.0, 0.0, 60.0)
