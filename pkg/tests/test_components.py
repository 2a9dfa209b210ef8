from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shorefault.components.cable import cable_pi_elements, earth_core_impedance
from shorefault.components.grounding import OpenCircuitError, grounding_network_solve
from shorefault.components.machine import (
    Exciter,
    Governor,
    MachineState,
    _machine_derivative,
    machine_equilibrium,
    machine_step,
)
from shorefault.components.zip_load import rated_admittance, zip_current
from shorefault.params import CableParams, ConfigurationError, GroundingParams, MachineParams, ZipParams


# ---------------------------------------------------------------------- cable
def test_cable_single_km():
    el = cable_pi_elements(CableParams(parallel=1), 1.0)
    assert el.r == pytest.approx(0.0927)
    assert el.x == pytest.approx(0.1163)
    assert el.c_total == pytest.approx(0.423e-6)
    assert el.l == pytest.approx(0.1163 / (2 * math.pi * 60))


def test_cable_four_parallel():
    el = cable_pi_elements(CableParams(), 1.0)
    assert el.r == pytest.approx(0.0927 / 4, rel=1e-12)
    assert el.c_total == pytest.approx(1.692e-6, rel=1e-12)
    assert el.c_end == pytest.approx(0.846e-6, rel=1e-12)


def test_cable_zero_length():
    el = cable_pi_elements(CableParams(), 0.0)
    assert el.r == el.l == el.c_total == 0.0


def test_cable_needs_length():
    with pytest.raises(ValueError):
        cable_pi_elements(CableParams())
    with pytest.raises(ValueError):
        cable_pi_elements(CableParams(), -1.0)


def test_earth_cores():
    assert earth_core_impedance(CableParams(), 2.0) == pytest.approx(complex(0.182, 0.1356) * 0.5)


# --------------------------------------------------------------------- ZIP load
def test_zip_rated_point():
    assert zip_current(1.0, ZipParams()).power == pytest.approx(1.0)


def test_zip_reduced_voltage():
    assert zip_current(0.9, ZipParams()).power == pytest.approx(0.871)


def test_zip_zero_voltage_flags_constant_power():
    r = zip_current(0.0, ZipParams())
    assert r.power == pytest.approx(0.25)
    assert r.low_voltage
    assert r.current == 0.0


@given(st.floats(1e-6, 1.5))
def test_zip_current_bounded_and_consistent(v):
    r = zip_current(v, ZipParams())
    assert math.isfinite(r.current) and r.current >= 0
    assert r.current == pytest.approx(r.admittance * v, abs=1e-12)
    if v >= 0.3:
        # above the switch-over the drawn power equals the demanded power
        assert r.current * v == pytest.approx(r.power, rel=1e-12)


def test_zip_rejects_negative_voltage():
    with pytest.raises(ValueError):
        zip_current(-0.1, ZipParams())


def test_zip_shares_invariant():
    with pytest.raises(ConfigurationError, match="sum to 1"):
        ZipParams(z=0.7, i=0.15, p=0.25).validate()


def test_rated_admittance_draws_rating():
    p = ZipParams()
    y = rated_admittance(p, 11e3)
    v = 11e3 / math.sqrt(3)
    s = 3 * v * v * y.conjugate()
    assert abs(s) == pytest.approx(15e6)
    assert s.real / abs(s) == pytest.approx(0.9)


# ------------------------------------------------------------------- grounding
def test_grounding_zero_current():
    sol = grounding_network_solve(GroundingParams(), 0.0)
    assert sol.v_touch == 0 and sol.v_ds == 0 and sol.v_hull == 0


def test_grounding_touch_voltage_through_earth_cores():
    # 50 A forced through the lumped earth cores alone gives 50 * 5.7 mOhm
    p = GroundingParams(r_neutral=1e4, r_earth_ship=1e4, r_earth_shore=1e4, r_ngr=1.0, switch_closed=True,
                        generator_grounding=False)
    sol = grounding_network_solve(p, 50.0)
    assert abs(sol.i_earth_cores) == pytest.approx(50.0, rel=1e-6)
    assert abs(sol.v_touch) == pytest.approx(0.285, rel=1e-6)


def test_grounding_current_balance():
    p = GroundingParams(r_ngr=540.0)
    sol = grounding_network_solve(p, 12.0 + 3.0j, capacitive_shore=1.0 + 0.5j, capacitive_ship=0.2j)
    # all fault current returns to the neutral through NGR and generator resistor, minus capacitive shares
    assert sol.i_ngr + sol.i_rgen == pytest.approx(12.0 + 3.0j - (1.0 + 0.5j) - 0.2j, abs=1e-9)


def test_grounding_switch_open_vs_closed():
    p = GroundingParams(r_ngr=540.0)
    opened = grounding_network_solve(p, 10.0, capacitive_shore=0.5)
    closed = grounding_network_solve(replace(p, switch_closed=True), 10.0, capacitive_shore=0.5)
    assert closed.v_ds == 0
    assert abs(opened.v_ds) > 0
    # the open switch carries no current, so shore earth only sees the capacitive return
    assert opened.i_switch == 0


def test_grounding_without_return_path():
    p = GroundingParams(generator_grounding=False)
    with pytest.raises(ValueError):
        grounding_network_solve(p, complex(math.nan, 0))
    assert issubclass(OpenCircuitError, RuntimeError)


# --------------------------------------------------------------------- machine
def _rated():
    p = MachineParams()
    v = 1.0 + 0j
    i = complex(0.8, -0.6) * 0.9
    return p, v, i


def test_machine_equilibrium_derivatives_vanish():
    p, v, i_t = _rated()
    st0, efd, tm = machine_equilibrium(p, v, i_t)
    rot = complex(math.cos(st0.delta - math.pi / 2), math.sin(st0.delta - math.pi / 2))
    i = i_t / rot
    dx = _machine_derivative(p, st0.as_array(), efd, tm, i.real, i.imag, 2 * math.pi * 60)
    assert np.max(np.abs(dx)) < 1e-6


def test_machine_emf_matches_terminal_equation():
    p, v, i_t = _rated()
    st0, _, _ = machine_equilibrium(p, v, i_t)
    rot = complex(math.cos(st0.delta - math.pi / 2), math.sin(st0.delta - math.pi / 2))
    emf = complex(st0.ed_st, st0.eq_st) * rot
    assert emf == pytest.approx(v + complex(p.ra, p.xd_st) * i_t, abs=1e-12)


def test_machine_field_step_rises_with_open_circuit_time_constant():
    p = MachineParams()
    st0, efd, tm = machine_equilibrium(p, 1.0 + 0j, 0j)
    dt = 1e-3
    s = st0
    for _ in range(int(p.td0_t / dt)):
        s, _ = machine_step(p, s, 1.1 * efd, tm, (0.0, 0.0), dt)
    # open circuit: E'_q follows E_fd through a first-order lag T_d0'
    rise = (s.eq_t - st0.eq_t) / (0.1 * efd)
    assert rise == pytest.approx(1 - math.exp(-1), abs=0.02)


def test_machine_state_round_trip():
    s = MachineState(0.1, 1.0, 1.1, 1.05, 0.2)
    assert MachineState.from_array(s.as_array()) == s


def test_governor_steady_at_zero_error():
    g = Governor(MachineParams().governor, 0.6, 1e-3)
    for _ in range(2000):
        tq = g.step(0.0)
    assert tq == pytest.approx(0.6, abs=1e-9)


def test_governor_droop_gain():
    # without the rotor in the loop the droop loop is lightly damped, so
    # judge the mean torque over the last 10 s of a 100 s run
    g = Governor(MachineParams().governor, 0.5, 2e-3)
    tq = [g.step(-0.01) for _ in range(50000)]
    assert np.mean(tq[-5000:]) - 0.5 == pytest.approx(0.2, rel=0.01)


def test_exciter_respects_ceiling():
    ep = MachineParams().exciter
    ex = Exciter(ep, 2.0, 1.0, 1e-3)
    seen = []
    for _ in range(10000):
        seen.append(ex.step(0.2))  # deep voltage dip drives the amplifier to its limit
    assert max(seen) <= ep.efd_max + 1e-12
    assert max(seen) == pytest.approx(ep.efd_max, rel=1e-3)


def test_exciter_holds_equilibrium():
    ex = Exciter(MachineParams().exciter, 2.0, 1.0, 1e-3)
    for _ in range(1000):
        efd = ex.step(1.0)
    assert efd == pytest.approx(2.0, abs=1e-9)


def test_machine_reactance_validation():
    with pytest.raises(ConfigurationError):
        MachineParams(xq_st=0.2).validate()
