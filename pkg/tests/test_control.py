from __future__ import annotations

import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from shorefault.control import (
    PiState,
    inverter_control_step,
    loop_scale,
    make_inverter_control,
    make_rectifier_control,
    pi_step,
    rectifier_control_step,
)
from shorefault.params import ControlParams, ConverterParams, PiGains

DT = 50e-6
W = 2 * math.pi * 60


def test_pi_zero_error():
    assert pi_step(PiState(1.0, 1.0), 0.0, 1e-3) == 0.0


def test_pi_constant_error_one_second():
    s = PiState(0.48, 12.0)
    for _ in range(1000):
        out = pi_step(s, 1.0, 1e-3)
    assert out == pytest.approx(12.48, rel=1e-12)


def test_pi_clamp_and_anti_windup():
    s = PiState(1.0, 100.0, lower=-1.0, upper=1.0)
    first = pi_step(s, 10.0, 1e-3)
    assert first == 1.0
    for _ in range(100):
        assert pi_step(s, 10.0, 1e-3) == 1.0
    # the integrator did not wind up: a sign change leaves saturation at once
    assert pi_step(s, -0.5, 1e-3) < 1.0


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=200))
def test_pi_output_within_limits(errors):
    s = PiState(5.0, 200.0, lower=-2.0, upper=3.0)
    for e in errors:
        out = pi_step(s, e, 1e-3)
        assert -2.0 <= out <= 3.0


def test_pi_rejects_bad_limits_and_step():
    with pytest.raises(ValueError):
        PiState(1.0, 1.0, lower=1.0, upper=1.0)
    with pytest.raises(ValueError):
        pi_step(PiState(1.0, 1.0), 1.0, 0.0)


def test_loop_scale_places_crossover():
    g = PiGains(0.48, 12.0, 100.0)
    assert loop_scale(g, 2.0) * g.kp * 2.0 == pytest.approx(1.0)


# ------------------------------------------------------------------ rectifier
def _rect():
    return make_rectifier_control(ConverterParams(), ControlParams(), 50.0)


def test_rectifier_equilibrium_is_feedforward():
    st_ = _rect()
    v = (12247.0, 0.0)
    ud, uq = rectifier_control_step(st_, 28e3, None, (0.0, 0.0), v, 2 * math.pi * 50, DT)
    assert (ud, uq) == pytest.approx(v, abs=1e-9)


def test_rectifier_low_dc_voltage_raises_current_reference():
    st_ = _rect()
    rectifier_control_step(st_, 0.99 * 28e3, None, (0.0, 0.0), (12247.0, 0.0), 2 * math.pi * 50, DT)
    assert st_.i_d_ref > 0


def test_rectifier_squared_error_linearization():
    st_ = _rect()
    delta = 28.0  # 0.1 % low
    rectifier_control_step(st_, 28e3 - delta, None, (0.0, 0.0), (12247.0, 0.0), 2 * math.pi * 50, DT)
    # normalized error (V^2 - v^2) / V^2 is 2 delta / V to first order
    expected = (st_.outer.kp + st_.outer.ki * DT) * 2 * delta / 28e3
    assert st_.i_d_ref == pytest.approx(expected, rel=2e-3)


def test_rectifier_current_reference_clamped():
    st_ = _rect()
    for _ in range(200):
        rectifier_control_step(st_, 20e3, None, (0.0, 0.0), (12247.0, 0.0), 2 * math.pi * 50, DT)
    assert st_.i_d_ref == pytest.approx(ControlParams().rectifier_current_limit)


def test_rectifier_voltage_limit():
    st_ = _rect()
    ud, uq = rectifier_control_step(st_, 28e3, None, (0.0, 0.0), (20e3, 5e3), 2 * math.pi * 50, DT, v_limit=15e3)
    assert math.hypot(ud, uq) == pytest.approx(15e3)


# ------------------------------------------------------------------- inverter
def _inv(**ctrl):
    return make_inverter_control(ConverterParams(), replace(ControlParams(), **ctrl))


def test_inverter_at_reference_returns_feedforward():
    s = _inv()
    v = s.v_ref
    ud, uq = inverter_control_step(s, v, (0.0, 0.0), (0.0, 0.0), W, DT)
    xl = W * s.inductance
    bc = W * s.capacitance
    # the current reference is the capacitor current, the inner loops then track zero current error
    assert s.i_ref == pytest.approx((0.0, -bc * v[0]), abs=1e-9)
    assert ud == pytest.approx(v[0] + xl * 0.0 + s.last_inner[0], abs=1e-9)
    assert uq == pytest.approx(v[1] + s.last_inner[1], abs=1e-9)


@pytest.mark.parametrize("sat", [10e3, 20e3])
def test_inverter_bolted_fault_pins_inner_loop(sat):
    s = _inv(inverter_saturation=sat)
    for _ in range(40):
        inverter_control_step(s, (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), W, DT)
    assert s.last_inner[0] == pytest.approx(sat)
    assert s.saturated


@given(st.lists(st.tuples(st.floats(-3e4, 3e4), st.floats(-3e4, 3e4), st.floats(-2e4, 2e4), st.floats(-2e4, 2e4)),
                min_size=1, max_size=50), st.booleans())
def test_inverter_inner_output_respects_saturation(samples, vector):
    s = _inv(vector_saturation=vector)
    for vd, vq, i_d, i_q in samples:
        inverter_control_step(s, (vd, vq), (i_d, i_q), (0.0, 0.0), W, DT)
        pd, pq = s.last_inner
        if vector:
            assert math.hypot(pd, pq) <= s.saturation * (1 + 1e-12)
        else:
            assert abs(pd) <= s.saturation and abs(pq) <= s.saturation
