from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from shorefault.fault_analysis import (
    KI_VALUES,
    REFERENCE_CURRENT,
    REFERENCE_DC_VOLTAGE,
    SensitivityRow,
    analyse_three_phase,
    check_trends,
    commutation_reactance,
    decompose,
    decompose_series,
    run_three_phase,
    sensitivity_sweep,
    strictly_increasing,
    synthetic_record,
    time_constant_verdict,
    with_control,
)
from shorefault.network import FaultSpec
from shorefault.numerics import ParameterError
from shorefault.params import ConfigurationError, SystemParams
from shorefault.scenarios import ScenarioConfig


# ----------------------------------------------------------------- synthetic
@pytest.mark.parametrize("key", [("ki", 12.0), ("ki", 30.0), ("sat", 20e3)])
def test_decomposition_recovers_generating_coefficients(key):
    current, voltage = REFERENCE_CURRENT[key], REFERENCE_DC_VOLTAGE[key]
    ts = synthetic_record(current, voltage)
    dec = decompose_series(ts, 0.05)
    for name, value in zip("abf", current):
        assert dec.fit_current[name] == pytest.approx(value, rel=0.01)
    for name, value in zip("abcf", voltage):
        assert dec.fit_voltage[name] == pytest.approx(value, rel=0.01)
    assert dec.i_s == pytest.approx(7000.0, rel=0.01)
    assert dec.phases_consistent
    assert dec.residual < 0.01
    assert dec.metadata["v_dc_approach"] == "from above"


def test_decomposition_needs_post_fault_record():
    ts = synthetic_record(REFERENCE_CURRENT[("ki", 12.0)], REFERENCE_DC_VOLTAGE[("ki", 12.0)], duration=0.2)
    with pytest.raises(ParameterError):
        decompose_series(ts, 0.05)


def test_decompose_rejects_slg_run():
    res = run_three_phase()
    with pytest.raises(ParameterError):
        decompose(replace(res, config=replace(res.config, fault=FaultSpec("slg"))))


def test_time_constant_verdict():
    assert time_constant_verdict(27.0, 27.0).verdict == "pass"
    v = time_constant_verdict(27.0, 40.0)
    assert v.verdict == "fail"
    assert v.relative_difference == pytest.approx(13 / 27)
    assert time_constant_verdict(0.0, 27.0).verdict == "indeterminate"
    assert time_constant_verdict(27.0, math.nan).verdict == "indeterminate"


def test_trends_on_reference_rows():
    rows = [SensitivityRow("ki", k, *REFERENCE_CURRENT[("ki", k)], *REFERENCE_DC_VOLTAGE[("ki", k)]) for k in KI_VALUES]
    out = check_trends(rows)
    assert all(out.values())
    rows[2].b2 = 20.0
    out = check_trends(rows)
    assert not out["b2 increasing with K_I"]
    assert not out["time constants equal"]


def test_strictly_increasing():
    assert strictly_increasing([1, 2, 3])
    assert not strictly_increasing([1, 1, 3])
    assert not strictly_increasing([1, math.nan])


def test_sensitivity_parameter_validated():
    with pytest.raises(ConfigurationError):
        sensitivity_sweep("kp")


def test_with_control_keeps_proportional_gain():
    p = with_control(SystemParams(), ki=25.0, sat=15e3)
    assert p.control.pi1.ki == 25.0
    assert p.control.pi1.kp == SystemParams().control.pi1.kp
    assert p.control.inverter_saturation == 15e3


def test_run_three_phase_needs_three_phase_fault():
    with pytest.raises(ConfigurationError):
        run_three_phase(config=ScenarioConfig.from_table("SC3"))


# ---------------------------------------------------------------- simulation
@pytest.fixture(scope="module")
def baseline():
    p = SystemParams()
    return p, analyse_three_phase(run_three_phase(p), p)


def test_symmetric_current_matches_thevenin(baseline):
    _, out = baseline
    assert out["i_s_ratio"] == pytest.approx(1.0, rel=0.03)


def test_symmetric_current_scales_with_commutation_reactance(baseline):
    p, out = baseline
    doubled = replace(p, converter=replace(p.converter, l_g=2 * p.converter.l_g))
    out2 = analyse_three_phase(run_three_phase(doubled), doubled)
    expected = commutation_reactance(p) / commutation_reactance(doubled)
    assert out2["decomposition"].i_s / out["decomposition"].i_s == pytest.approx(expected, rel=0.03)


def test_symmetric_current_scales_with_prefault_voltage(baseline):
    p, out = baseline
    low = replace(p, converter=replace(p.converter, v_out=0.9 * p.converter.v_out))
    out2 = analyse_three_phase(run_three_phase(low), low)
    assert out2["v_prefault"] / out["v_prefault"] == pytest.approx(0.9, rel=1e-3)
    assert out2["decomposition"].i_s / out["decomposition"].i_s == pytest.approx(0.9, rel=0.03)


def test_symmetric_current_is_balanced(baseline):
    _, out = baseline
    mags = [ph.magnitude for ph in out["decomposition"].symmetric.values()]
    assert max(mags) / min(mags) == pytest.approx(1.0, abs=0.02)
    angles = [ph.angle for ph in out["decomposition"].symmetric.values()]
    step = np.angle(np.exp(1j * (angles[0] - angles[1])))
    assert step == pytest.approx(2 * math.pi / 3, abs=0.05)
