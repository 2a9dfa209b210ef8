"""Salient-pole synchronous machine with DEGOV1 governor and AC5C exciter.

All quantities are per unit on the machine base. The stator interface is a
voltage behind the subtransient reactance: the network sees the emf
``E''`` in series with ``r_a + j x''`` (``x_q'' = x_d''``).

Phasor convention (network frame): ``(v_d + j v_q) * exp(j(delta - pi/2))``
is the network phasor, i.e. ``delta`` is the angle of the q axis.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..numerics import IntegrationError, integrate_step
from ..params import ExciterParams, GovernorParams, MachineParams


@dataclass
class MachineState:
    delta: float
    omega: float
    eq_t: float  # E'_q
    eq_st: float  # E''_q
    ed_st: float  # E''_d

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.omega, self.eq_t, self.eq_st, self.ed_st])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "MachineState":
        return cls(*(float(v) for v in x))


def _machine_derivative(p: MachineParams, x: np.ndarray, efd: float, tm: float,
                        i_d: float, i_q: float, omega_base: float) -> np.ndarray:
    delta, omega, eq_t, eq_st, ed_st = x
    te = ed_st * i_d + eq_st * i_q
    return np.array([
        omega_base * (omega - 1.0),
        (tm - te - p.damping * (omega - 1.0)) / (2.0 * p.h),
        (efd - eq_t - (p.xd - p.xd_t) * i_d) / p.td0_t,
        (eq_t - eq_st - (p.xd_t - p.xd_st) * i_d) / p.td0_st,
        (-ed_st + (p.xq - p.xq_st) * i_q) / p.tq0_st,
    ])


def machine_step(params: MachineParams, state: MachineState, efd: float, tm: float,
                 i_dq: tuple[float, float], dt: float, t: float = 0.0) -> tuple[MachineState, complex]:
    """Advance the rotor and flux states over ``dt`` with frozen terminal currents.

    Returns the new state and the subtransient emf ``E''_d + j E''_q``.
    """
    wb = 2.0 * math.pi * params.frequency
    i_d, i_q = i_dq
    x = integrate_step(state.as_array(), lambda _t, y: _machine_derivative(params, y, efd, tm, i_d, i_q, wb),
                       t, dt)
    new = MachineState.from_array(x)
    return new, complex(new.ed_st, new.eq_st)


def machine_equilibrium(params: MachineParams, v_t: complex, i_t: complex) -> tuple[MachineState, float, float]:
    """Steady state for terminal voltage ``v_t`` and output current ``i_t``
    (network-frame per-unit phasors). Returns the state, E_fd and T_m."""
    e_q = v_t + complex(params.ra, params.xq) * i_t
    delta = math.atan2(e_q.imag, e_q.real)
    rot = complex(math.cos(delta - math.pi / 2), -math.sin(delta - math.pi / 2))
    i = i_t * rot
    v = v_t * rot
    i_d, i_q = i.real, i.imag
    v_q = v.imag
    ed_st = (params.xq - params.xq_st) * i_q
    eq_t = v_q + params.ra * i_q + params.xd_t * i_d
    eq_st = v_q + params.ra * i_q + params.xd_st * i_d
    efd = eq_t + (params.xd - params.xd_t) * i_d
    tm = ed_st * i_d + eq_st * i_q
    return MachineState(delta, 1.0, eq_t, eq_st, ed_st), efd, tm


class Governor:
    """DEGOV1: control box, actuator with integrator and lead-lag, pure
    combustion delay on the torque output, and droop on the throttle via a
    first-order feedback filter."""

    def __init__(self, params: GovernorParams, p_ref: float, dt: float):
        self.params = params
        self.p_ref = p_ref
        self.dt = dt
        # x1, x1', z (actuator integrator), w1 (T5 lag), w2 (T6 lead-lag), fb
        self.x = np.array([0.0, 0.0, p_ref, p_ref, p_ref, p_ref])
        n = max(int(round(params.td / dt)), 0)
        self._delay = deque([p_ref] * n, maxlen=n) if n else None
        self.torque = p_ref

    def _throttle(self, x: np.ndarray) -> float:
        p = self.params
        return x[4] + p.t4 / p.t6 * (x[3] - x[4])

    def _derivative(self, x: np.ndarray, speed_error: float) -> np.ndarray:
        p = self.params
        u = -speed_error + p.droop * (self.p_ref - x[5])
        x1, x1d, z, w1, w2, fb = x
        y1 = p.k * (x1 + p.t3 * x1d)
        dz = y1
        if (z >= p.t_max and dz > 0) or (z <= p.t_min and dz < 0):
            dz = 0.0
        y2 = self._throttle(x)
        return np.array([
            x1d,
            (u - x1 - p.t1 * x1d) / (p.t1 * p.t2),
            dz,
            (z - w1) / p.t5,
            (w1 - w2) / p.t6,
            (y2 - fb) / p.te,
        ])

    def step(self, speed_error: float, t: float = 0.0) -> float:
        """``speed_error`` is ``omega - omega_ref`` in per unit."""
        p = self.params
        self.x = integrate_step(self.x, lambda _t, y: self._derivative(y, speed_error), t, self.dt)
        self.x[2] = min(max(self.x[2], p.t_min), p.t_max)
        y2 = min(max(self._throttle(self.x), p.t_min), p.t_max)
        if self._delay is None:
            self.torque = y2
        else:
            self.torque = self._delay[0]
            self._delay.append(y2)
        return self.torque


def governor_step(governor: Governor, speed_error: float, t: float = 0.0) -> float:
    return governor.step(speed_error, t)


class Exciter:
    """AC5C excitation system without saturation: transducer lag, optional
    lead-lag, limited amplifier, exciter field and rate feedback."""

    def __init__(self, params: ExciterParams, efd0: float, v_t0: float, dt: float):
        self.params = params
        self.dt = dt
        p = params
        vr0 = p.ke * efd0
        # vc, ll, vr, efd, r1, r2
        self.x = np.array([v_t0, 0.0, vr0, efd0, efd0, 0.0])
        self.v_ref = v_t0 + vr0 / p.ka
        self.x[1] = self.v_ref - v_t0
        self.efd = efd0

    def _feedback(self, x: np.ndarray) -> tuple[float, float]:
        p = self.params
        y = (x[3] - x[4]) / p.tf1
        if p.tf2 > 0:
            return p.kf * (x[5] + p.tf3 / p.tf2 * (y - x[5])), y
        return p.kf * y, y

    def _derivative(self, x: np.ndarray, v_t: float) -> np.ndarray:
        p = self.params
        vc, ll, vr, efd, r1, r2 = x
        vf, y = self._feedback(x)
        ve = self.v_ref - vc - vf
        if p.tb > 0:
            dll = (ve - ll) / p.tb
            out = ll + p.tc / p.tb * (ve - ll)
        else:
            dll = 0.0
            out = ve
        dvr = (p.ka * out - vr) / p.ta
        if (vr >= p.vr_max and dvr > 0) or (vr <= p.vr_min and dvr < 0):
            dvr = 0.0
        defd = (vr - p.ke * efd) / p.te
        if (efd >= p.efd_max and defd > 0) or (efd <= p.efd_min and defd < 0):
            defd = 0.0
        dr2 = (y - r2) / p.tf2 if p.tf2 > 0 else 0.0
        return np.array([(v_t - vc) / p.tr, dll, dvr, defd, (efd - r1) / p.tf1, dr2])

    def step(self, v_t: float, t: float = 0.0) -> float:
        p = self.params
        self.x = integrate_step(self.x, lambda _t, y: self._derivative(y, v_t), t, self.dt)
        self.x[2] = min(max(self.x[2], p.vr_min), p.vr_max)
        self.x[3] = min(max(self.x[3], p.efd_min), p.efd_max)
        self.efd = float(self.x[3])
        return self.efd


def exciter_step(exciter: Exciter, v_t: float, t: float = 0.0) -> float:
    return exciter.step(v_t, t)


@dataclass
class Machine:
    """Generator with its controls, advanced once per network step.

    Currents and voltages passed to :meth:`step` are in per unit on the
    machine base, as network-frame complex phasors relative to the
    synchronous reference ``exp(j omega_s t)``.
    """

    params: MachineParams
    dt: float
    state: MachineState = field(init=False)
    governor: Governor = field(init=False)
    exciter: Exciter = field(init=False)

    def initialize(self, v_t: complex, i_t: complex) -> None:
        self.state, efd, tm = machine_equilibrium(self.params, v_t, i_t)
        self.governor = Governor(self.params.governor, tm, self.dt)
        self.exciter = Exciter(self.params.exciter, efd, abs(v_t), self.dt)

    @property
    def rotation(self) -> complex:
        """Factor mapping machine dq (d + jq) to the network frame."""
        return complex(math.cos(self.state.delta - math.pi / 2), math.sin(self.state.delta - math.pi / 2))

    def emf(self) -> complex:
        return complex(self.state.ed_st, self.state.eq_st) * self.rotation

    def step(self, v_t: complex, i_t: complex, t: float = 0.0) -> complex:
        i = i_t / self.rotation
        tm = self.governor.step(self.state.omega - 1.0, t)
        efd = self.exciter.step(abs(v_t), t)
        self.state, _ = machine_step(self.params, self.state, efd, tm, (i.real, i.imag), self.dt, t)
        x = self.state.as_array()
        if not np.all(np.isfinite(x)):
            raise IntegrationError(-1, t)
        return self.emf()
