"""Electrical, control and solver constants of the shore connection model.

Defaults reproduce the frequency converter, control and cable tables of the
reference design; values the design leaves open (shore transformer, grid
strength, machine constants, cable length) carry typical figures and can be
overridden from a configuration file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, is_dataclass, replace
from typing import Any


# space-vector modulation reaches a phase amplitude of v_dc / sqrt(3)
SVPWM_LIMIT = 2.0 / math.sqrt(3.0)


class ConfigurationError(ValueError):
    pass


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigurationError(message)


@dataclass(frozen=True)
class GridParams:
    frequency: float = 50.0
    voltage: float = 15e3  # line-to-line rms
    short_circuit_power: float = 500e6
    x_over_r: float = 10.0

    def validate(self) -> None:
        _require(self.frequency > 0 and self.voltage > 0, "grid frequency and voltage must be positive")
        _require(self.short_circuit_power > 0 and self.x_over_r > 0,
                 "grid short-circuit power and X/R must be positive")

    @property
    def impedance(self) -> complex:
        z = self.voltage ** 2 / self.short_circuit_power
        r = z / math.sqrt(1.0 + self.x_over_r ** 2)
        return complex(r, r * self.x_over_r)


@dataclass(frozen=True)
class ConverterParams:
    v_in: float = 15e3  # rectifier ac input, line-to-line rms
    v_dc: float = 28e3
    r_in: float = 0.25
    l_in: float = 5.26e-3
    c_dc: float = 5e-3
    v_out: float = 15e3  # inverter ac output, line-to-line rms
    r_f: float = 0.12
    l_f: float = 2.39e-3
    c_f: float = 0.1e-3
    r_g: float = 0.81
    l_g: float = 1.28e-3
    frequency: float = 60.0
    # "capacitor": r_g damps C_f (series R-C shunt branch); "series": r_g in series with l_g
    damping_placement: str = "capacitor"

    @property
    def r_series(self) -> float:
        """Resistance in series with l_g."""
        return self.r_g if self.damping_placement == "series" else 0.0

    @property
    def r_damping(self) -> float:
        """Resistance in series with c_f."""
        return self.r_g if self.damping_placement == "capacitor" else 0.0

    @property
    def v_dc_min(self) -> float:
        return 2.0 * math.sqrt(2.0) * self.v_in / math.sqrt(3.0)

    def validate(self) -> None:
        for f in ("r_in", "l_in", "c_dc", "r_f", "l_f", "c_f", "r_g", "l_g"):
            _require(getattr(self, f) > 0, f"converter.{f} must be positive")
        _require(self.damping_placement in ("capacitor", "series"),
                 "converter.damping_placement must be 'capacitor' or 'series'")
        _require(self.v_dc > self.v_dc_min,
                 f"converter.v_dc={self.v_dc:g} V must exceed the minimum dc voltage "
                 f"2*sqrt(2)*V_i/sqrt(3) = {self.v_dc_min:.1f} V")


@dataclass(frozen=True)
class PiGains:
    kp: float
    ki: float
    cutoff: float  # Hz, loop crossover the gains were designed for


@dataclass(frozen=True)
class ControlParams:
    pi1: PiGains = PiGains(0.48, 12.0, 100.0)  # rectifier dc-voltage-squared loop
    pi2: PiGains = PiGains(17.0, 6291.0, 1000.0)  # rectifier current loops
    pi3: PiGains = PiGains(0.019, 1.1, 200.0)  # inverter capacitor-voltage loops
    pi4: PiGains = PiGains(47.0, 16837.0, 2000.0)  # inverter current loops
    inverter_saturation: float = 10e3  # volts, clamp of the inverter inner loop output
    vector_saturation: bool = False  # clamp the dq vector magnitude instead of each axis
    rectifier_saturation: float = SVPWM_LIMIT  # fraction of v_dc/2 available to the rectifier
    rectifier_current_limit: float = 5000.0  # amperes (peak), clamp of the dc-voltage loop output
    decoupling: bool = True
    load_feedforward: bool = True  # grid-side current added to the PI3 current reference
    load_feedforward_gain: float = 0.9  # below 1 so a stiff generator bus cannot leave the loop undamped
    dc_compensation: bool = False  # divide the inverter modulation by the measured dc voltage
    voltage_feedforward: bool = True  # capacitor voltage added ahead of the PI4 clamp
    inverter_modulation_limit: float = SVPWM_LIMIT  # fraction of v_dc/2 available to the inverter

    def validate(self) -> None:
        for name in ("pi1", "pi2", "pi3", "pi4"):
            g = getattr(self, name)
            _require(g.kp >= 0 and g.ki >= 0 and g.cutoff > 0, f"control.{name} gains must be non-negative")
        _require(self.inverter_saturation > 0, "control.inverter_saturation must be positive")
        _require(self.rectifier_saturation > 0, "control.rectifier_saturation must be positive")
        _require(self.inverter_modulation_limit > 0, "control.inverter_modulation_limit must be positive")
        _require(0.0 <= self.load_feedforward_gain <= 1.0, "control.load_feedforward_gain must be in [0, 1]")
        _require(self.rectifier_current_limit > 0, "control.rectifier_current_limit must be positive")


@dataclass(frozen=True)
class TransformerParams:
    rating: float = 20e6
    v_primary: float = 15e3  # delta, converter side
    v_secondary: float = 11e3  # star, ship side, neutral brought out to the NGR
    uk: float = 0.08
    x_over_r: float = 10.0

    def validate(self) -> None:
        _require(self.rating > 0 and self.v_primary > 0 and self.v_secondary > 0,
                 "transformer ratings must be positive")
        _require(0 < self.uk < 1 and self.x_over_r > 0, "transformer uk must be in (0, 1)")

    @property
    def leakage(self) -> complex:
        """Series impedance per phase, referred to the star secondary."""
        z = self.uk * self.v_secondary ** 2 / self.rating
        r = z / math.sqrt(1.0 + self.x_over_r ** 2)
        return complex(r, r * self.x_over_r)

    @property
    def turns_ratio(self) -> float:
        """Primary line-to-line voltage over secondary phase voltage."""
        return self.v_primary / (self.v_secondary / math.sqrt(3.0))


@dataclass(frozen=True)
class CableParams:
    r_phase: float = 0.0927  # ohm/km at 65 degC
    x_phase: float = 0.1163  # ohm/km at 60 Hz
    c_phase: float = 0.423e-6  # F/km
    r_earth: float = 0.182
    x_earth: float = 0.1356
    parallel: int = 4
    length: float | None = None  # km; None -> calibrated to the charging-current target
    frequency: float = 60.0
    charging_current_target: float = 1.370

    def validate(self) -> None:
        for f in ("r_phase", "x_phase", "c_phase", "r_earth", "x_earth"):
            _require(getattr(self, f) > 0, f"cable.{f} must be positive")
        _require(int(self.parallel) == self.parallel and self.parallel >= 1,
                 "cable.parallel must be an integer >= 1")
        _require(self.length is None or self.length >= 0, "cable.length must be non-negative")
        _require(self.charging_current_target > 0, "cable.charging_current_target must be positive")


@dataclass(frozen=True)
class GroundingParams:
    r_ngr: float = 3500.0
    r_gen: float = 1270.0
    r_bonding: float = 5.7e-3  # four earth cores, lumped
    r_neutral: float = 9.2e-3
    r_earth_shore: float = 1.0
    r_earth_ship: float = 1.0
    switch_closed: bool = False
    generator_grounding: bool = True
    r_switch: float = 1e-6  # closed disconnect switch contact

    def validate(self) -> None:
        for f in ("r_ngr", "r_gen", "r_bonding", "r_neutral", "r_earth_shore", "r_earth_ship", "r_switch"):
            _require(getattr(self, f) > 0, f"grounding.{f} must be positive")


@dataclass(frozen=True)
class GovernorParams:
    """DEGOV1 constants (per unit on machine base)."""

    t1: float = 0.2
    t2: float = 0.3
    t3: float = 0.5
    k: float = 20.0
    t4: float = 1.0
    t5: float = 0.1
    t6: float = 0.2
    td: float = 0.05
    t_max: float = 1.1
    t_min: float = 0.0
    droop: float = 0.05
    te: float = 0.1

    def validate(self) -> None:
        for f in ("t1", "t2", "t5", "t6", "te", "droop"):
            _require(getattr(self, f) > 0, f"governor.{f} must be positive")
        _require(self.td >= 0 and self.t_max > self.t_min, "governor limits inconsistent")


@dataclass(frozen=True)
class ExciterParams:
    """AC5C constants (per unit on machine base)."""

    tr: float = 0.01
    tc: float = 0.0
    tb: float = 0.0
    ka: float = 400.0
    ta: float = 0.02
    vr_max: float = 7.3
    vr_min: float = -7.3
    ke: float = 1.0
    te: float = 0.8
    kf: float = 0.03
    tf1: float = 1.0
    tf2: float = 0.8
    tf3: float = 0.0
    efd_max: float = 7.3
    efd_min: float = -7.3

    def validate(self) -> None:
        _require(self.ta > 0 and self.te > 0 and self.tf1 > 0 and self.tr > 0,
                 "exciter time constants must be positive")
        _require(self.vr_max > self.vr_min and self.efd_max > self.efd_min, "exciter limits inconsistent")


@dataclass(frozen=True)
class MachineParams:
    rating: float = 20e6
    voltage: float = 11e3
    frequency: float = 60.0
    xd: float = 2.0
    xd_t: float = 0.30
    xd_st: float = 0.18
    xq: float = 1.0
    xq_st: float = 0.18
    td0_t: float = 3.5
    td0_st: float = 0.03
    tq0_st: float = 0.05
    h: float = 1.2
    ra: float = 0.005
    damping: float = 0.0
    governor: GovernorParams = GovernorParams()
    exciter: ExciterParams = ExciterParams()

    def validate(self) -> None:
        _require(self.xd > self.xd_t > self.xd_st > 0, "machine reactances must satisfy x_d > x_d' > x_d'' > 0")
        _require(self.xq > self.xq_st > 0, "machine reactances must satisfy x_q > x_q'' > 0")
        for f in ("td0_t", "td0_st", "tq0_st", "h"):
            _require(getattr(self, f) > 0, f"machine.{f} must be positive")
        _require(abs(self.xq_st - self.xd_st) <= 1e-9,
                 "machine.xq_st must equal machine.xd_st (voltage-behind-subtransient-reactance interface)")
        self.governor.validate()
        self.exciter.validate()


@dataclass(frozen=True)
class ZipParams:
    rating: float = 15e6
    power_factor: float = 0.9
    z: float = 0.60
    i: float = 0.15
    p: float = 0.25
    v_switch: float = 0.3  # below this voltage the constant-P share behaves as constant Z
    filter_time: float = 0.01  # s, voltage magnitude filter for the I and P shares

    def validate(self) -> None:
        _require(min(self.z, self.i, self.p) >= 0, "ZIP shares must be non-negative")
        _require(abs(self.z + self.i + self.p - 1.0) <= 1e-9,
                 f"ZIP shares must sum to 1 (z + i + p = {self.z + self.i + self.p:g})")
        _require(0 < self.power_factor <= 1, "ZIP power factor must be in (0, 1]")
        _require(self.rating >= 0, "ZIP rating must be non-negative")


@dataclass(frozen=True)
class SolverParams:
    dt: float = 50e-6
    method: str = "trapezoidal"
    settle_min: float = 0.1  # s of simulation before the settlement test starts
    settle_max: float = 10.0
    settle_tolerance: float = 1e-3  # per-cycle relative rms variation
    settle_cycles: int = 5
    post_fault: float = 0.5
    measure_cycles: int = 3
    damping_steps: int = 2  # backward-Euler half steps after every topology change

    def validate(self) -> None:
        _require(self.dt > 0, "solver.dt must be positive")
        _require(self.method == "trapezoidal", "solver.method must be 'trapezoidal'")
        _require(self.post_fault >= 0.5, "solver.post_fault must be at least 0.5 s")


@dataclass(frozen=True)
class SystemParams:
    grid: GridParams = GridParams()
    converter: ConverterParams = ConverterParams()
    control: ControlParams = ControlParams()
    transformer: TransformerParams = TransformerParams()
    cable: CableParams = CableParams()
    grounding: GroundingParams = GroundingParams()
    machine: MachineParams = MachineParams()
    load: ZipParams = ZipParams()
    solver: SolverParams = SolverParams()
    utility_frequency: float = 50.0
    ship_frequency: float = 60.0

    def validate(self) -> "SystemParams":
        for f in fields(self):
            v = getattr(self, f.name)
            if is_dataclass(v):
                v.validate()
        return self


def with_overrides(obj: Any, overrides: dict[str, Any], path: str = "") -> Any:
    """Recursively replace dataclass fields from a nested mapping."""
    names = {f.name: f for f in fields(obj)}
    changes = {}
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigurationError(f"unknown key '{where}'")
        current = getattr(obj, key)
        if is_dataclass(current):
            if isinstance(value, dict):
                changes[key] = with_overrides(current, value, where)
            elif isinstance(value, (list, tuple)) and isinstance(current, PiGains):
                changes[key] = PiGains(*map(float, value))
            else:
                raise ConfigurationError(f"'{where}' must be a table")
        else:
            if isinstance(current, bool):
                if not isinstance(value, bool):
                    raise ConfigurationError(f"'{where}' must be true or false")
            elif isinstance(current, (int, float)) and (isinstance(value, bool) or not isinstance(value, (int, float))):
                raise ConfigurationError(f"'{where}' must be a number")
            elif isinstance(current, float) and isinstance(value, int):
                value = float(value)
            elif isinstance(current, str) and not isinstance(value, str):
                raise ConfigurationError(f"'{where}' must be a string")
            changes[key] = value
    return replace(obj, **changes)


def to_dict(obj: Any) -> dict[str, Any]:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        out[f.name] = to_dict(v) if is_dataclass(v) else v
    return out

