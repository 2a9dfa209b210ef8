"""Dual-loop dq controllers of the back-to-back frequency converter.

Park vectors follow the convention of :func:`shorefault.numerics.abc_to_dq0`
(q axis lagging d), so a Park vector ``x = d - j q`` rotates with
``exp(j theta)``. The plant equations below are written in that form:

* rectifier input inductor (current drawn from the grid):
  ``L di_d/dt = v_d - R i_d - u_d - w L i_q``,
  ``L di_q/dt = v_q - R i_q - u_q + w L i_d``
* inverter filter inductor: ``L di_d/dt = u_d - v_d - R i_d - w L i_q``,
  ``L di_q/dt = u_q - v_q - R i_q + w L i_d``
* filter capacitor: ``C dv_d/dt = i_fd - i_gd - w C v_q``,
  ``C dv_q/dt = i_fq - i_gq + w C v_d``

Table gains are applied through a per-loop scale that places the loop
crossover at the tabulated cut-off frequency (see :func:`loop_scale`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .params import ControlParams, ConverterParams, PiGains


@dataclass
class PiState:
    kp: float
    ki: float
    integrator: float = 0.0
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self) -> None:
        if not self.lower < self.upper:
            raise ValueError(f"PI limits must satisfy lower < upper, got ({self.lower}, {self.upper})")

    def reset(self, output: float, error: float = 0.0) -> None:
        """Set the integrator so that ``error`` produces ``output``."""
        self.integrator = output - self.kp * error


def pi_step(state: PiState, error: float, dt: float) -> float:
    """One sample of a clamped PI controller.

    The integrator advances by ``ki * error * dt``; when the output clamps,
    back-calculation with unity tracking gain (tracking time ``kp / ki``)
    bleeds the excess back into the integrator, so a saturated controller
    holds its integrator at the limit instead of winding up.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    state.integrator += state.ki * error * dt
    raw = state.kp * error + state.integrator
    out = min(max(raw, state.lower), state.upper)
    if out != raw:
        if state.kp > 0:
            state.integrator += min(1.0, state.ki / state.kp * dt) * (out - raw)
        else:
            state.integrator += out - raw
    return out


def loop_scale(gains: PiGains, plant_gain_at_cutoff: float) -> float:
    """Factor ``s`` such that ``s * kp * |G(j w_c)| = 1``."""
    return 1.0 / (gains.kp * plant_gain_at_cutoff) if gains.kp > 0 else 1.0


def _scaled(gains: PiGains, scale: float, lower: float = -math.inf, upper: float = math.inf) -> PiState:
    return PiState(scale * gains.kp, scale * gains.ki, 0.0, lower, upper)


@dataclass
class RectifierControlState:
    """PI1 on the squared dc voltage, PI2 on the dq input currents."""

    outer: PiState
    inner_d: PiState
    inner_q: PiState
    inductance: float
    resistance: float
    v_dc_ref: float
    v_base: float
    i_d_ref: float = 0.0
    i_q_ref: float = 0.0
    decoupling: bool = True


def make_rectifier_control(conv: ConverterParams, ctrl: ControlParams,
                           frequency: float) -> RectifierControlState:
    v_d = math.sqrt(2.0 / 3.0) * conv.v_in
    wc1 = 2.0 * math.pi * ctrl.pi1.cutoff
    # d(v^2/V0^2)/dt = 3 v_d i_d / (C V0^2)
    g1 = 3.0 * v_d / (conv.c_dc * conv.v_dc ** 2 * wc1)
    wc2 = 2.0 * math.pi * ctrl.pi2.cutoff
    g2 = 1.0 / abs(complex(conv.r_in, wc2 * conv.l_in))
    return RectifierControlState(
        outer=_scaled(ctrl.pi1, loop_scale(ctrl.pi1, g1), -ctrl.rectifier_current_limit, ctrl.rectifier_current_limit),
        inner_d=_scaled(ctrl.pi2, loop_scale(ctrl.pi2, g2)),
        inner_q=_scaled(ctrl.pi2, loop_scale(ctrl.pi2, g2)),
        inductance=conv.l_in, resistance=conv.r_in,
        v_dc_ref=conv.v_dc, v_base=conv.v_dc, decoupling=ctrl.decoupling,
    )


def rectifier_control_step(state: RectifierControlState, v_dc: float, v_dc_ref: float | None,
                           i_dq: tuple[float, float], v_dq: tuple[float, float], omega: float,
                           dt: float, v_limit: float | None = None) -> tuple[float, float]:
    """Converter voltage references (Park components) for the rectifier.

    ``v_dq`` is the grid-side voltage at the converter input filter and
    ``i_dq`` the current drawn from it; ``omega`` is the grid angular
    frequency of the reference frame. With ``v_limit`` the reference vector
    is clamped to that magnitude and the current integrators absorb the
    excess, so a modulation-limited rectifier does not wind up.
    """
    ref = state.v_dc_ref if v_dc_ref is None else v_dc_ref
    error = (ref * ref - v_dc * v_dc) / (state.v_base * state.v_base)
    state.i_d_ref = pi_step(state.outer, error, dt)
    i_d, i_q = i_dq
    pd = pi_step(state.inner_d, state.i_d_ref - i_d, dt)
    pq = pi_step(state.inner_q, state.i_q_ref - i_q, dt)
    xl = omega * state.inductance if state.decoupling else 0.0
    ud, uq = v_dq[0] - xl * i_q - pd, v_dq[1] + xl * i_d - pq
    mag = math.hypot(ud, uq)
    if v_limit is not None and mag > v_limit:
        k = v_limit / mag
        # output = feedforward - pi, so the integrators move against the clamp
        state.inner_d.integrator += ud - ud * k
        state.inner_q.integrator += uq - uq * k
        ud, uq = ud * k, uq * k
    return ud, uq


@dataclass
class InverterControlState:
    """PI3 on the filter-capacitor voltage, PI4 on the inverter-side current."""

    outer_d: PiState
    outer_q: PiState
    inner_d: PiState
    inner_q: PiState
    inductance: float
    capacitance: float
    saturation: float
    v_ref: tuple[float, float]
    vector_saturation: bool = False
    decoupling: bool = True
    load_feedforward: bool = True
    feedforward_gain: float = 1.0
    voltage_feedforward: bool = True
    i_ref: tuple[float, float] = (0.0, 0.0)
    saturated: bool = False
    last_inner: tuple[float, float] = field(default=(0.0, 0.0))


def make_inverter_control(conv: ConverterParams, ctrl: ControlParams) -> InverterControlState:
    wc3 = 2.0 * math.pi * ctrl.pi3.cutoff
    g3 = 1.0 / (wc3 * conv.c_f)
    wc4 = 2.0 * math.pi * ctrl.pi4.cutoff
    # the commutation path seen by the inner loop is both filter inductors
    g4 = 1.0 / abs(complex(conv.r_f + conv.r_series, wc4 * (conv.l_f + conv.l_g)))
    sat = ctrl.inverter_saturation
    v_d = math.sqrt(2.0 / 3.0) * conv.v_out
    return InverterControlState(
        outer_d=_scaled(ctrl.pi3, loop_scale(ctrl.pi3, g3)),
        outer_q=_scaled(ctrl.pi3, loop_scale(ctrl.pi3, g3)),
        inner_d=_scaled(ctrl.pi4, loop_scale(ctrl.pi4, g4), -sat, sat),
        inner_q=_scaled(ctrl.pi4, loop_scale(ctrl.pi4, g4), -sat, sat),
        inductance=conv.l_f, capacitance=conv.c_f, saturation=sat, v_ref=(v_d, 0.0),
        vector_saturation=ctrl.vector_saturation, decoupling=ctrl.decoupling,
        load_feedforward=ctrl.load_feedforward, feedforward_gain=ctrl.load_feedforward_gain, voltage_feedforward=ctrl.voltage_feedforward,
    )


def _clamp_vector(state: InverterControlState, pd: float, pq: float) -> tuple[float, float]:
    mag = math.hypot(pd, pq)
    if mag <= state.saturation:
        return pd, pq
    k = state.saturation / mag
    pd, pq = pd * k, pq * k
    for pi in (state.inner_d, state.inner_q):
        pi.integrator = min(max(pi.integrator, -state.saturation), state.saturation)
    return pd, pq


def inverter_control_step(state: InverterControlState, v_c_dq: tuple[float, float],
                          i_f_dq: tuple[float, float], i_g_dq: tuple[float, float], omega: float,
                          dt: float) -> tuple[float, float]:
    """Converter voltage references (Park components) for the inverter."""
    v_d, v_q = v_c_dq
    i_d, i_q = i_f_dq
    bc = omega * state.capacitance if state.decoupling else 0.0
    k = state.feedforward_gain if state.load_feedforward else 0.0
    ffd, ffq = k * i_g_dq[0], k * i_g_dq[1]
    ref_d = ffd + bc * v_q + pi_step(state.outer_d, state.v_ref[0] - v_d, dt)
    ref_q = ffq - bc * v_d + pi_step(state.outer_q, state.v_ref[1] - v_q, dt)
    state.i_ref = (ref_d, ref_q)
    pd = pi_step(state.inner_d, ref_d - i_d, dt)
    pq = pi_step(state.inner_q, ref_q - i_q, dt)
    if state.vector_saturation:
        pd, pq = _clamp_vector(state, pd, pq)
    state.saturated = max(abs(pd), abs(pq)) >= state.saturation * (1.0 - 1e-12)
    state.last_inner = (pd, pq)
    xl = omega * state.inductance if state.decoupling else 0.0
    if not state.voltage_feedforward:
        v_d = v_q = 0.0
    return v_d + xl * i_q + pd, v_q - xl * i_d + pq


__all__ = [
    "InverterControlState", "PiState", "RectifierControlState", "inverter_control_step",
    "loop_scale", "make_inverter_control", "make_rectifier_control", "pi_step",
    "rectifier_control_step",
]
