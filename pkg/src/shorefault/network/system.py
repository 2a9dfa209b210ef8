"""The complete shore-connection circuit: assembly, initialization, stepping
and fault switching.

Space vectors ``x = (2/3)(a + b e^{j2pi/3} + c e^{-j2pi/3})`` are used for
all three-phase signals; the Park vector in a frame at angle ``theta`` is
``x e^{-j theta} = d - j q``.
"""

from __future__ import annotations

import cmath
import copy
import math
from dataclasses import dataclass

import numpy as np

from ..components.cable import cable_pi_elements
from ..components.machine import Machine
from ..components.zip_load import rated_admittance, zip_current
from ..control import (
    inverter_control_step,
    make_inverter_control,
    make_rectifier_control,
    rectifier_control_step,
)
from ..numerics import TimeSeries
from ..params import ConfigurationError, SystemParams
from .circuit import Circuit, CompanionSolver
from .phasor import PhasorSolution, solve_phasors

SQRT3 = math.sqrt(3.0)
S32 = SQRT3 / 2.0
SQ23 = math.sqrt(2.0 / 3.0)
PHASES = "abc"
A = cmath.exp(2j * math.pi / 3)  # phase-b phasor lags by 120 degrees: X_b = X_a / A
BOLTED_RESISTANCE = 1e-4  # ohm, stands in for a zero-impedance fault
LOAD_VOLTAGE_STEP = 5e-4  # per unit, resolution of the ZIP load update


def space_vector(a: float, b: float, c: float) -> complex:
    return complex((2.0 * a - b - c) / 3.0, (b - c) / SQRT3)


def phase_values(x: complex) -> tuple[float, float, float]:
    al, be = x.real, x.imag
    return al, -0.5 * al + S32 * be, -0.5 * al - S32 * be


def phase_phasors(x: complex) -> tuple[complex, complex, complex]:
    return x, x / A, x * A


def calibrate_cable_length(params: SystemParams) -> float:
    """Cable length (km) giving the target charging current for a bolted
    phase-to-earth fault at rated ship voltage: ``I_c = 3 w C V_phase``."""
    cab = params.cable
    v_ph = params.transformer.v_secondary / SQRT3
    per_km = 3.0 * 2.0 * math.pi * params.ship_frequency * cab.c_phase * cab.parallel * v_ph
    return cab.charging_current_target / per_km


def cable_length(params: SystemParams) -> float:
    return params.cable.length if params.cable.length is not None else calibrate_cable_length(params)


@dataclass(frozen=True)
class Topology:
    dg_on: bool = True
    dg_grounding: bool = True
    switch_closed: bool = False
    r_ngr: float | None = None
    p_dg: float = 0.0  # W, used only for the consistency check

    def validate(self) -> None:
        if not self.dg_on and self.p_dg != 0:
            raise ConfigurationError("generator is off but its power set point is not zero")
        if not self.dg_on and self.dg_grounding:
            raise ConfigurationError("generator grounding requires the generator to be connected")
        if self.r_ngr is not None and not self.r_ngr > 0:
            raise ConfigurationError("NGR resistance must be positive")


@dataclass(frozen=True)
class FaultSpec:
    """Fault at the ship main switchboard.

    ``start`` is measured from the end of initialization. With
    ``inception_angle`` set (degrees, phase-a busbar voltage taken as
    ``sin``), the closing is postponed to the next sample at that point on
    wave; 90 is the voltage peak.
    """

    kind: str = "slg"
    start: float = 0.0
    resistance: float = 0.0
    inception_angle: float | None = 90.0

    def validate(self) -> None:
        if self.kind not in ("slg", "three-phase"):
            raise ConfigurationError(f"unknown fault kind {self.kind!r}")
        if self.start < 0 or self.resistance < 0:
            raise ConfigurationError("fault start and resistance must be non-negative")


CHANNELS: dict[str, str] = {}
for _p in PHASES:
    CHANNELS[f"v_conv_{_p}"] = "V"
for _p in PHASES:
    CHANNELS[f"i_conv_{_p}"] = "A"
for _p in PHASES:
    CHANNELS[f"i_inv_{_p}"] = "A"
for _p in PHASES:
    CHANNELS[f"v_bus_{_p}"] = "V"
for _p in PHASES:
    CHANNELS[f"i_ship_{_p}"] = "A"
for _p in PHASES:
    CHANNELS[f"i_gen_{_p}"] = "A"
CHANNELS.update({
    "i_ngr": "A", "v_ngr": "V", "i_rgen": "A", "i_fault": "A", "i_earth": "A", "i_neutral": "A",
    "v_touch": "V", "v_ds": "V", "v_hull": "V", "v_dc": "V",
})


def build_circuit(params: SystemParams, topo: Topology) -> Circuit:
    """Circuit of the converter, transformer, cable, grounding mesh and ship."""
    ckt = Circuit()
    g = params.grid
    conv = params.converter
    zg = g.impedance
    w_grid = 2 * math.pi * params.utility_frequency
    w_ship = 2 * math.pi * params.ship_frequency
    tr = params.transformer
    ztr = tr.leakage
    n = tr.turns_ratio
    cab = cable_pi_elements(params.cable, cable_length(params))
    gr = params.grounding
    r_ngr = gr.r_ngr if topo.r_ngr is None else topo.r_ngr

    for k, p in enumerate(PHASES):
        nxt = PHASES[(k + 1) % 3]
        ckt.add_rl(f"grid_{p}", "gnd", f"pcc_{p}", zg.real, zg.imag / w_grid, group="grid")
        ckt.add_rl(f"rect_{p}", f"pcc_{p}", "gnd", conv.r_in, conv.l_in, group="grid")
        ckt.add_rl(f"inv_{p}", "gnd", f"cf_{p}", conv.r_f, conv.l_f)
        if conv.r_damping > 0:
            ckt.add_rl(f"rd_{p}", f"cf_{p}", f"cd_{p}", conv.r_damping)
            ckt.add_c(f"cf_{p}", f"cd_{p}", "gnd", conv.c_f)
        else:
            ckt.add_c(f"cf_{p}", f"cf_{p}", "gnd", conv.c_f)
        ckt.add_rl(f"lg_{p}", f"cf_{p}", f"tp_{p}", conv.r_series, conv.l_g)
        ckt.add_coupled(f"xfmr_{p}", {f"tp_{p}": 1.0 / n, f"tp_{nxt}": -1.0 / n, f"ts_{p}": -1.0, "tn": 1.0},
                        ztr.real, ztr.imag / w_ship)
    ckt.add_rl("ngr", "tn", "ngr_term", r_ngr)
    ckt.add_rl("r_neutral", "hull", "ngr_term", gr.r_neutral)
    ckt.add_rl("switch", "ngr_term", "shore_earth", gr.r_switch, enabled=topo.switch_closed)
    ckt.add_rl("r_bonding", "hull", "shore_earth", gr.r_bonding)
    ckt.add_rl("r_eship", "hull", "gnd", gr.r_earth_ship)
    ckt.add_rl("r_eshore", "shore_earth", "gnd", gr.r_earth_shore)
    for p in PHASES:
        if cab.c_total > 0:
            ckt.add_c(f"cab_shore_{p}", f"ts_{p}", "shore_earth", cab.c_end)
            ckt.add_c(f"cab_ship_{p}", f"bus_{p}", "hull", cab.c_end)
        ckt.add_rl(f"cable_{p}", f"ts_{p}", f"bus_{p}", max(cab.r, 1e-6), cab.l)
    y_load = rated_admittance(params.load, tr.v_secondary)
    if params.load.rating > 0:
        z_load = 1.0 / y_load
        for p in PHASES:
            ckt.add_rl(f"load_{p}", f"bus_{p}", "load_n", z_load.real, z_load.imag / w_ship)
    if topo.dg_on:
        m = params.machine
        zb = m.voltage ** 2 / m.rating
        for p in PHASES:
            ckt.add_rl(f"gen_{p}", "gen_n", f"bus_{p}", m.ra * zb, m.xd_st * zb / (2 * math.pi * m.frequency))
        ckt.add_rl("r_gen", "gen_n", "hull", gr.r_gen, enabled=topo.dg_grounding)
    ckt.add_rl("fault_slg", "bus_a", "hull", BOLTED_RESISTANCE, enabled=False)
    for p, q in (("a", "b"), ("b", "c"), ("c", "a")):
        ckt.add_rl(f"fault_{p}{q}", f"bus_{p}", f"bus_{q}", BOLTED_RESISTANCE, enabled=False)
    return ckt


@dataclass
class FaultPhasors:
    """Steady fault solution split into its resistive and capacitive parts.

    ``i_r`` is the current through the NGR and the generator grounding
    resistor, ``i_c`` the charging current returning through the cable
    capacitances; both are rms amperes.
    """

    solution: PhasorSolution
    i_fault: float
    i_r: float
    i_c: float
    i_ngr: float
    i_rgen: float

    @classmethod
    def from_solution(cls, sol: PhasorSolution) -> "FaultPhasors":
        ckt = sol.circuit
        names = [b.name for b in ckt.branches]

        def cur(name: str) -> complex:
            if name not in names:
                return 0j
            x = sol.i(name)
            return 0j if np.isnan(x.real) else x

        i_ngr = cur("ngr")
        i_rgen = cur("r_gen") if "r_gen" in names and ckt.branches[names.index("r_gen")].enabled else 0j
        caps = sum((cur(f"cab_{end}_{p}") for end in ("shore", "ship") for p in PHASES), 0j)
        i_f = cur("fault_slg")
        r2 = 1.0 / math.sqrt(2.0)
        return cls(sol, abs(i_f) * r2, abs(i_ngr + i_rgen) * r2, abs(caps) * r2,
                   abs(i_ngr) * r2, abs(i_rgen) * r2)


class ShoreSystem:
    """Time-domain model of the shore connection with its controls."""

    def __init__(self, params: SystemParams, topology: Topology | None = None):
        params.validate()
        topo = topology or Topology()
        topo.validate()
        self.params = params
        self.topology = topo
        self.dt = params.solver.dt
        self.circuit = build_circuit(params, topo)
        self.solver = CompanionSolver(self.circuit, self.dt)
        ckt = self.circuit
        nodes = ckt.nodes
        self._ix = {b.name: k for k, b in enumerate(ckt.branches)}
        self._nx = {name: k for k, name in enumerate(nodes)}
        self.w_grid = 2 * math.pi * params.utility_frequency
        self.w_ship = 2 * math.pi * params.ship_frequency
        self.rect = make_rectifier_control(params.converter, params.control, params.utility_frequency)
        self.inv = make_inverter_control(params.converter, params.control)
        self.machine = Machine(params.machine, self.dt) if topo.dg_on else None
        self.v_dc = params.converter.v_dc
        self.t = 0.0
        self.fault: FaultSpec | None = None
        self.fault_time: float | None = None
        self._damp = 0
        self._meas: dict[str, complex] = {}
        self._p_dc = (0.0, 0.0)
        self.v_filtered = 1.0
        self._load_v = None
        self.initialized = False
        self.v_base = SQ23 * params.transformer.v_secondary
        self._y_load = rated_admittance(params.load, params.transformer.v_secondary) if params.load.rating > 0 else 0j
        self._grid_emf = SQ23 * params.grid.voltage
        self._idx3 = {key: [self._ix[f"{key}_{p}"] for p in PHASES]
                      for key in ("grid", "rect", "inv", "lg", "gen", "cable", "load")
                      if f"{key}_a" in self._ix}
        self._bus = [self._nx[f"bus_{p}"] for p in PHASES]
        self._cf = [self._nx[f"cf_{p}"] for p in PHASES]
        self._pcc = [self._nx[f"pcc_{p}"] for p in PHASES]
        self._build_output_map()

    # ------------------------------------------------------------------ outputs
    @property
    def channels(self) -> list[str]:
        return list(CHANNELS)

    @property
    def state_dimension(self) -> int:
        """Dynamic states: inductor currents, capacitor voltages, dc link and
        (when present) the five machine states."""
        n_dyn = sum(1 for b in self.circuit.branches if b.kind == 1 or b.l > 0)
        return n_dyn + 1 + (5 if self.machine is not None else 0)

    def _build_output_map(self) -> None:
        nch = len(CHANNELS)
        mv = np.zeros((nch, len(self.circuit.nodes)))
        mi = np.zeros((nch, len(self.circuit.branches)))
        names = list(CHANNELS)

        def node(ch, name, w=1.0):
            if name in self._nx:
                mv[names.index(ch), self._nx[name]] += w

        def br(ch, name, w=1.0):
            if name in self._ix:
                mi[names.index(ch), self._ix[name]] += w

        for p in PHASES:
            node(f"v_conv_{p}", f"cf_{p}")
            br(f"i_conv_{p}", f"lg_{p}")
            br(f"i_inv_{p}", f"inv_{p}")
            node(f"v_bus_{p}", f"bus_{p}")
            br(f"i_ship_{p}", f"cable_{p}")
            br(f"i_gen_{p}", f"gen_{p}")
        br("i_ngr", "ngr")
        node("v_ngr", "tn")
        node("v_ngr", "ngr_term", -1.0)
        br("i_rgen", "r_gen")
        br("i_fault", "fault_slg")
        br("i_earth", "r_bonding")
        br("i_neutral", "r_neutral")
        node("v_touch", "hull")
        node("v_touch", "shore_earth", -1.0)
        node("v_ds", "ngr_term")
        node("v_ds", "shore_earth", -1.0)
        node("v_hull", "hull")
        self._mv, self._mi = mv, mi
        self._vdc_row = names.index("v_dc")

    def outputs(self) -> np.ndarray:
        row = self._mv @ self.solver.v + self._mi @ self.solver.i
        row[self._vdc_row] = self.v_dc
        return row

    # ------------------------------------------------------------ phasor model
    def _zip_admittance(self, v_pu: float) -> complex:
        """Per-phase admittance of the whole ZIP load at voltage ``v_pu``."""
        lp = self.params.load
        v = max(v_pu, lp.v_switch)
        return self._y_load * zip_current(v, lp).admittance

    def _ship_phasors(self, p_dg: float, q_dg: float, dg_emf: complex | None, tol: float,
                      dg_supplies_load: bool):
        """Ship-side 60 Hz solution with the filter capacitor pinned at rated
        voltage; iterates the ZIP admittance on the positive-sequence busbar
        voltage. Returns (solution, generator emf dict, load overrides, E_gen)."""
        ckt = self.circuit
        vc = SQ23 * self.params.converter.v_out
        fixed = {f"cf_{p}": x for p, x in zip(PHASES, phase_phasors(vc))}
        v_bus = self.v_base + 0j
        e_gen = dg_emf
        for _ in range(200):
            overrides = {}
            if "load_a" in self._ix:
                y = self._zip_admittance(abs(v_bus) / self.v_base)
                for p in PHASES:
                    overrides[self._ix[f"load_{p}"]] = y
            emf = {}
            if self.machine is not None:
                gen_b = ckt.branches[self._ix["gen_a"]]
                z_gen = complex(gen_b.r, self.w_ship * gen_b.l)
                if dg_emf is None:
                    s_dg = complex(p_dg, q_dg)
                    if dg_supplies_load and "load_a" in self._ix:
                        y = overrides[self._ix["load_a"]]
                        s_dg = 1.5 * abs(v_bus) ** 2 * np.conj(y)
                    i_t = np.conj(2.0 * s_dg / 3.0 / v_bus)
                    e_gen = v_bus + z_gen * i_t
                for p, x in zip(PHASES, phase_phasors(e_gen)):
                    emf[self._ix[f"gen_{p}"]] = x
            sol = solve_phasors(ckt, self.w_ship, emf, {"ship"}, fixed, admittance_overrides=overrides)
            new = (sol.v("bus_a") + A * sol.v("bus_b") + A * A * sol.v("bus_c")) / 3.0
            done = abs(new - v_bus) < tol * self.v_base
            v_bus = new
            if done:
                break
        return sol, emf, overrides, e_gen

    def fault_phasors(self, fault: FaultSpec | None, dg_emf: complex | None = None, p_dg: float = 0.0,
                      q_dg: float = 0.0, dg_supplies_load: bool = False, tol: float = 1e-10) -> FaultPhasors:
        """Sinusoidal steady state with ``fault`` applied.

        The converter holds its filter capacitor at rated voltage (positive
        sequence; the delta primary carries no zero sequence). The generator
        is an emf behind its subtransient impedance: ``dg_emf`` (peak phase-a
        volts) when known, otherwise the pre-fault dispatch.
        """
        ckt = self.circuit
        saved = [(b.enabled, b.r) for b in ckt.branches]
        if fault is not None:
            self._close_fault_branches(fault, ckt_only=True)
        try:
            sol, _, _, _ = self._ship_phasors(p_dg, q_dg, dg_emf, tol, dg_supplies_load)
        finally:
            for b, (on, r) in zip(ckt.branches, saved):
                b.enabled, b.r = on, r
        return FaultPhasors.from_solution(sol)

    def steady_state(self, p_dg: float = 0.0, q_dg: float = 0.0, dg_emf: complex | None = None,
                     tol: float = 1e-10, dg_supplies_load: bool = False) -> dict:
        """Balanced 60 Hz and 50 Hz phasor operating point.

        The converter holds its filter capacitor at rated voltage, the
        generator delivers ``p_dg + j q_dg`` (W, var) unless ``dg_emf`` (peak
        phase-a volts) is given, and the ZIP load is evaluated at the solved
        busbar voltage. With ``dg_supplies_load`` the generator output tracks
        the load demand instead.
        """
        ckt = self.circuit
        conv = self.params.converter
        vc = SQ23 * conv.v_out
        sol, emf, overrides, e_gen = self._ship_phasors(p_dg, q_dg, dg_emf, tol, dg_supplies_load)
        # replace the pinned capacitor voltage by the inverter emf behind L_f
        zf = complex(conv.r_f, self.w_ship * conv.l_f)
        i_g = sol.i("lg_a")
        y_cf = 1.0 / complex(conv.r_damping, -1.0 / (self.w_ship * conv.c_f))
        i_f = i_g + y_cf * vc
        e_inv = vc + zf * i_f
        for p, x in zip(PHASES, phase_phasors(e_inv)):
            emf[self._ix[f"inv_{p}"]] = x
        ship = solve_phasors(ckt, self.w_ship, emf, {"ship"}, admittance_overrides=overrides)
        p_inv = 1.5 * (e_inv * np.conj(i_f)).real
        # rectifier: unity power factor in the grid-emf frame, lossless dc link
        e_g = self._grid_emf
        z_tot = self.params.grid.impedance.real + conv.r_in
        disc = e_g * e_g - 4.0 * z_tot * p_inv / 1.5
        if disc < 0:
            raise ConfigurationError("converter power exceeds the grid transfer limit")
        i_r = (e_g - math.sqrt(disc)) / (2.0 * z_tot)
        z_grid = complex(self.params.grid.impedance.real, self.params.grid.impedance.imag)
        z_r = complex(conv.r_in, self.w_grid * conv.l_in)
        v_r = e_g - (z_grid + z_r) * i_r
        gemf = {}
        for p, xe, xr in zip(PHASES, phase_phasors(e_g), phase_phasors(v_r)):
            gemf[self._ix[f"grid_{p}"]] = xe
            gemf[self._ix[f"rect_{p}"]] = -xr
        grid = solve_phasors(ckt, self.w_grid, gemf, {"grid"})
        return {"ship": ship, "grid": grid, "ship_emf": emf, "grid_emf": gemf,
                "load_admittance": overrides, "p_inv": p_inv, "dg_emf": e_gen}

    # ------------------------------------------------------------ initialization
    def initialize(self, p_dg: float = 0.0, q_dg: float = 0.0, dg_supplies_load: bool = False) -> None:
        """Set every state to the balanced steady state (time zero)."""
        op = self.steady_state(p_dg, q_dg, dg_supplies_load=dg_supplies_load)
        self.operating_point = op
        nb = len(self.circuit.branches)
        i0 = np.zeros(nb)
        u0 = np.zeros(nb)
        e0 = np.zeros(nb)
        v0 = np.zeros(len(self.circuit.nodes))
        for key, emf_key in (("ship", "ship_emf"), ("grid", "grid_emf")):
            sol = op[key]
            act = ~np.isnan(sol.currents)
            i0[act] = sol.currents[act].real
            u0[act] = sol.branch_voltages[act].real
            for k, x in op[emf_key].items():
                e0[k] = x.real
            vv = np.where(np.isnan(sol.voltages), 0.0, sol.voltages)
            v0 += vv.real
        self.solver.set_state(i0, u0, e0)
        self.solver.v = v0
        self.v_dc = self.params.converter.v_dc
        self.t = 0.0
        v_bus = op["ship"].v("bus_a")
        self.v_filtered = abs(v_bus) / self.v_base
        self._measure()
        self._align_controls()
        if self.machine is not None:
            ship = op["ship"]
            vb = self.v_base
            m = self.params.machine
            ib = m.rating / (1.5 * vb)
            self.machine.initialize(v_bus / vb, ship.i("gen_a") / ib)
        self._load_v = None
        self._update_load()
        self._p_dc = self._dc_powers()
        self.initialized = True

    def _align_controls(self) -> None:
        """Preset the PI integrators so the controllers reproduce the present
        converter voltages with zero error."""
        m = self._meas
        rc, ic = self.rect, self.inv
        # rectifier
        e = self.solver.e
        u_r = -space_vector(*e[self._idx3["rect"]]) * cmath.exp(-1j * self._theta_grid(self.t))
        ud, uq = u_r.real, -u_r.imag
        v = m["v_pcc"]
        i = m["i_rect"]
        xl = self.w_grid * rc.inductance if rc.decoupling else 0.0
        rc.i_d_ref, rc.i_q_ref = i.real, 0.0
        rc.outer.integrator = i.real
        rc.inner_d.integrator = v.real - xl * (-i.imag) - ud
        rc.inner_q.integrator = (-v.imag) + xl * i.real - uq
        # inverter
        u_i = space_vector(*e[self._idx3["inv"]]) * cmath.exp(-1j * self._theta_ship(self.t))
        ud, uq = u_i.real, -u_i.imag
        vc, i_f, i_g = m["v_cf"], m["i_inv"], m["i_g"]
        xl = self.w_ship * ic.inductance if ic.decoupling else 0.0
        bc = self.w_ship * ic.capacitance if ic.decoupling else 0.0
        ff = 1.0 if ic.voltage_feedforward else 0.0
        ic.inner_d.integrator = ud - ff * vc.real - xl * (-i_f.imag)
        ic.inner_q.integrator = uq - ff * (-vc.imag) + xl * i_f.real
        kf = ic.feedforward_gain if ic.load_feedforward else 0.0
        ffd, ffq = kf * i_g.real, -kf * i_g.imag
        ic.outer_d.integrator = i_f.real - ffd - bc * (-vc.imag)
        ic.outer_q.integrator = -i_f.imag - ffq + bc * vc.real
        ic.i_ref = (i_f.real, -i_f.imag)

    # ------------------------------------------------------------------ stepping
    def _theta_grid(self, t: float) -> float:
        return self.w_grid * t

    def _theta_ship(self, t: float) -> float:
        return self.w_ship * t

    def _sv_nodes(self, idx) -> complex:
        v = self.solver.v
        return space_vector(v[idx[0]], v[idx[1]], v[idx[2]])

    def _sv_branches(self, key: str) -> complex:
        i = self.solver.i
        k = self._idx3[key]
        return space_vector(i[k[0]], i[k[1]], i[k[2]])

    def _measure(self) -> None:
        rg = cmath.exp(-1j * self._theta_grid(self.t))
        rs = cmath.exp(-1j * self._theta_ship(self.t))
        m = self._meas
        m["v_pcc"] = self._sv_nodes(self._pcc) * rg
        m["i_rect"] = self._sv_branches("rect") * rg
        m["v_cf"] = self._sv_nodes(self._cf) * rs
        m["i_inv"] = self._sv_branches("inv") * rs
        m["i_g"] = self._sv_branches("lg") * rs
        m["v_bus_sv"] = self._sv_nodes(self._bus)
        m["v_bus"] = m["v_bus_sv"] * rs
        if self.machine is not None:
            m["i_gen"] = self._sv_branches("gen") * rs

    def _dc_powers(self) -> tuple[float, float]:
        e, i = self.solver.e, self.solver.i
        kr, ki = self._idx3["rect"], self._idx3["inv"]
        p_rect = -float(e[kr] @ i[kr])
        p_inv = float(e[ki] @ i[ki])
        return p_rect, p_inv

    def _update_load(self) -> None:
        """Refresh the load branches to the ZIP admittance at the filtered
        busbar voltage (quantized, so the factorization cache stays small)."""
        if "load_a" not in self._ix:
            return
        vq = round(self.v_filtered / LOAD_VOLTAGE_STEP) * LOAD_VOLTAGE_STEP
        if vq == self._load_v:
            return
        self._load_v = vq
        z = 1.0 / self._zip_admittance(vq)
        for k in self._idx3["load"]:
            self.solver.set_rl(k, z.real, z.imag / self.w_ship)

    def _voltage_limit(self, limit: float) -> float:
        """Largest converter phase-voltage amplitude the dc link supports."""
        v = 0.5 * self.v_dc * limit
        if not self.params.control.dc_compensation:
            v *= self.params.converter.v_dc / max(self.v_dc, 1.0)
        return v

    def _modulate(self, u_sv: complex, limit: float) -> tuple[float, float, float]:
        vals = phase_values(u_sv)
        if not self.params.control.dc_compensation:
            s = self.v_dc / self.params.converter.v_dc
            vals = tuple(x * s for x in vals)
        h = 0.5 * self.v_dc * limit
        return tuple(min(max(x, -h), h) for x in vals)

    def step(self) -> None:
        h = self.dt
        t1 = self.t + h
        m = self._meas
        rc, ic = self.rect, self.inv
        v, i = m["v_pcc"], m["i_rect"]
        ud, uq = rectifier_control_step(rc, self.v_dc, None, (i.real, -i.imag), (v.real, -v.imag),
                                        self.w_grid, h, self._voltage_limit(self.params.control.rectifier_saturation))
        e_new = self.solver.e.copy()
        rot_g = cmath.exp(1j * self._theta_grid(t1))
        rot_s = cmath.exp(1j * self._theta_ship(t1))
        vr = self._modulate(complex(ud, -uq) * rot_g, self.params.control.rectifier_saturation)
        kr = self._idx3["rect"]
        for k, x in zip(kr, vr):
            e_new[k] = -x
        vc, i_f, i_g = m["v_cf"], m["i_inv"], m["i_g"]
        ud, uq = inverter_control_step(ic, (vc.real, -vc.imag), (i_f.real, -i_f.imag),
                                       (i_g.real, -i_g.imag), self.w_ship, h)
        vi = self._modulate(complex(ud, -uq) * rot_s, self.params.control.inverter_modulation_limit)
        for k, x in zip(self._idx3["inv"], vi):
            e_new[k] = x
        for k, x in zip(self._idx3["grid"], phase_values(self._grid_emf * rot_g)):
            e_new[k] = x
        if self.machine is not None:
            mp = self.params.machine
            ib = mp.rating / (1.5 * self.v_base)
            emf = self.machine.step(m["v_bus"] / self.v_base, m["i_gen"] / ib, self.t)
            for k, x in zip(self._idx3["gen"], phase_values(emf * self.v_base * rot_s)):
                e_new[k] = x
        self._update_load()
        theta = 1.0 if self._damp > 0 else 0.5
        self._damp = max(0, self._damp - 1)
        self.solver.step(e_new, theta, t1)
        p_new = self._dc_powers()
        c = self.params.converter.c_dc
        w = 0.5 * c * self.v_dc ** 2
        if theta == 0.5:
            w += 0.5 * h * ((p_new[0] - p_new[1]) + (self._p_dc[0] - self._p_dc[1]))
        else:
            w += h * (p_new[0] - p_new[1])
        self.v_dc = math.sqrt(max(2.0 * w / c, 0.0))
        self._p_dc = p_new
        self.t = t1
        self._measure()
        tau = self.params.load.filter_time
        self.v_filtered += (abs(m["v_bus_sv"]) / self.v_base - self.v_filtered) * min(1.0, h / tau)
        if self.fault is not None and self.fault_time is None and self._fault_due():
            self._close_fault()

    # ------------------------------------------------------------------ faults
    def _close_fault_branches(self, fault: FaultSpec, ckt_only: bool = False) -> None:
        r = fault.resistance if fault.resistance > 0 else BOLTED_RESISTANCE
        names = ["fault_slg"] if fault.kind == "slg" else ["fault_ab", "fault_bc", "fault_ca"]
        for name in names:
            k = self._ix[name]
            self.circuit.branches[k].enabled = True
            self.circuit.branches[k].r = r
            if not ckt_only:
                self.solver.r[k] = r
                self.solver.set_enabled(k, True)
                self.solver._cache.clear()

    def apply_fault(self, fault: FaultSpec, t: float | None = None) -> None:
        """Schedule ``fault`` relative to the present time (or close it now when
        ``t`` is the present time and no inception angle is requested)."""
        fault.validate()
        self.fault = fault
        self.fault_time = None
        self._fault_earliest = self.t + fault.start if t is None else t
        if self._fault_due():
            self._close_fault()

    def _fault_due(self) -> bool:
        if self.t + 1e-12 < self._fault_earliest:
            return False
        ang = self.fault.inception_angle
        if ang is None:
            return True
        # phase-a busbar voltage phase, sine reference, at this and the next sample
        x = self._meas["v_bus_sv"]
        phase_now = math.degrees(math.atan2(x.imag, x.real)) + 90.0
        nxt = phase_now + math.degrees(self.w_ship * self.dt)
        target = ang % 360.0
        a0 = phase_now % 360.0
        span = nxt - phase_now
        return (target - a0) % 360.0 < span

    def _close_fault(self) -> None:
        self._close_fault_branches(self.fault)
        self.fault_time = self.t
        self._damp = self.params.solver.damping_steps

    # --------------------------------------------------------------- simulation
    def run(self, duration: float, record: bool = True, decimate: int = 1) -> TimeSeries | None:
        if not self.initialized:
            raise RuntimeError("system must be initialized before running")
        n = int(round(duration / self.dt))
        if not record:
            for _ in range(n):
                self.step()
            return None
        rows = np.empty((n // decimate + 1, len(CHANNELS)))
        rows[0] = self.outputs()
        t0 = self.t
        j = 1
        for s in range(1, n + 1):
            self.step()
            if s % decimate == 0:
                rows[j] = self.outputs()
                j += 1
        chans = {name: rows[:j, c].copy() for c, name in enumerate(CHANNELS)}
        return TimeSeries(t0, self.dt * decimate, chans, dict(CHANNELS))

    def kcl_residual(self, node: str) -> float:
        return float(self.solver.kcl_residual()[self._nx[node]])

    # ---------------------------------------------------------------- snapshots
    def snapshot(self) -> dict:
        """Copy of every dynamic state (independent of NGR value and switch)."""
        s = self.solver
        return copy.deepcopy({
            "i": s.i, "u": s.u, "e": s.e, "v": s.v, "r": s.r, "l": s.l, "load_v": self._load_v, "v_dc": self.v_dc, "t": self.t,
            "rect": self.rect, "inv": self.inv, "machine": self.machine, "meas": self._meas,
            "p_dc": self._p_dc, "v_f": self.v_filtered,
        })

    def restore(self, snap: dict) -> None:
        snap = copy.deepcopy(snap)
        s = self.solver
        s.i = np.where(s.enabled, snap["i"], 0.0)
        s.u, s.e, s.v = snap["u"], snap["e"], snap["v"]
        for k in self._idx3.get("load", []):
            s.set_rl(k, snap["r"][k], snap["l"][k])
        self._load_v = snap["load_v"]
        self.v_dc, self.t = snap["v_dc"], snap["t"]
        self.rect, self.inv, self.machine = snap["rect"], snap["inv"], snap["machine"]
        self._meas, self._p_dc, self.v_filtered = snap["meas"], snap["p_dc"], snap["v_f"]
        self.initialized = True


def assemble(params: SystemParams, topology: Topology | None = None) -> ShoreSystem:
    return ShoreSystem(params, topology)


def steady_phasor_solve(params: SystemParams, fault: FaultSpec | None = None,
                        topology: Topology | None = None, **kw) -> FaultPhasors:
    """60 Hz phasor solution of the ship-side network, optionally faulted.

    Keyword arguments are passed to :meth:`ShoreSystem.fault_phasors`.
    """
    return ShoreSystem(params, topology).fault_phasors(fault, **kw)


def apply_fault(system: ShoreSystem, fault: FaultSpec, t: float | None = None) -> ShoreSystem:
    system.apply_fault(fault, t)
    return system
