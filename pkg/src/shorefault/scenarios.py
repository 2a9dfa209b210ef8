"""Study scenarios SC1-SC4, NGR sweeps and the grounding admissibility rules."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .network import CHANNELS, FaultSpec, ShoreSystem, Topology
from .numerics import IntegrationError, TimeSeries, cycle_rms, extract_phasor
from .params import ConfigurationError, SystemParams, with_overrides

SCENARIOS = ("SC1", "SC2", "SC3", "SC4")
NGR_VALUES = (25.0, 75.0, 125.0, 200.0, 300.0, 540.0, 1000.0, 3500.0)
SWITCH_STATES = (False, True)

# design rules
TOUCH_LIMIT = 30.0  # V
CHARGING_MARGIN = 1.25
FAULT_CURRENT_CEILING = 60.0  # A

# scenario rows: DG on, DG grounding, S_DG, S_load, S_HVSC (VA)
_TABLE = {
    "SC1": (True, True, 15e6, 15e6, 0.0),
    "SC2": (True, True, 0.0, 15e6, 15e6),
    "SC3": (False, False, 0.0, 15e6, 15e6),
    "SC4": (True, True, 15e6, 10e6, -5e6),
}


class InitializationError(RuntimeError):
    """The network did not reach a steady operating point."""

    def __init__(self, message: str, channel: str | None = None):
        super().__init__(message)
        self.channel = channel


@dataclass(frozen=True)
class ScenarioConfig:
    """One scenario row with the grounding choices and the fault event.

    Powers are apparent powers in VA, signed by direction (positive from
    shore to ship for ``p_hvsc``). The generator and the load share the load
    power factor, so the rows balance in both active and reactive power.
    """

    scenario: str
    dg_on: bool
    dg_grounding: bool
    p_dg: float
    p_load: float
    p_hvsc: float
    r_ngr: float = 540.0
    switch_closed: bool = False
    fault: FaultSpec = FaultSpec("slg")

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}")
        if abs(self.p_dg + self.p_hvsc - self.p_load) > 1e-6 * max(1.0, abs(self.p_load)):
            raise ConfigurationError(
                f"{self.scenario}: power balance violated (P_DG + P_HVSC = "
                f"{self.p_dg + self.p_hvsc:g} VA, P_load = {self.p_load:g} VA)")
        if not self.dg_on and (self.dg_grounding or self.p_dg != 0):
            raise ConfigurationError(f"{self.scenario}: generator is off but its grounding or power is set")
        if self.p_load < 0:
            raise ConfigurationError("load power must be non-negative")
        if not self.r_ngr > 0:
            raise ConfigurationError("NGR resistance must be positive")
        self.fault.validate()

    @classmethod
    def from_table(cls, scenario: str, r_ngr: float = 540.0, switch_closed: bool = False,
                   fault: FaultSpec | None = None) -> "ScenarioConfig":
        if scenario not in _TABLE:
            raise ConfigurationError(f"unknown scenario {scenario!r}")
        dg, gnd, s_dg, s_load, s_hvsc = _TABLE[scenario]
        cfg = cls(scenario, dg, gnd, s_dg, s_load, s_hvsc, float(r_ngr), switch_closed,
                  fault if fault is not None else FaultSpec("slg"))
        cfg.validate()
        return cfg

    @property
    def key(self) -> tuple:
        return (self.scenario, self.r_ngr, self.switch_closed)

    def topology(self) -> Topology:
        return Topology(self.dg_on, self.dg_grounding, self.switch_closed, self.r_ngr,
                        self.p_dg if self.dg_on else 0.0)

    def system_params(self, base: SystemParams) -> SystemParams:
        return with_overrides(base, {"load": {"rating": float(self.p_load)},
                                     "grounding": {"r_ngr": float(self.r_ngr),
                                                   "switch_closed": self.switch_closed,
                                                   "generator_grounding": self.dg_grounding}})

    def dispatch(self, pf: float) -> dict:
        """Generator set point for :meth:`ShoreSystem.initialize`."""
        if not self.dg_on:
            return {}
        if self.p_hvsc == 0:
            return {"dg_supplies_load": True}
        sin_phi = math.sqrt(max(0.0, 1.0 - pf * pf))
        return {"p_dg": self.p_dg * pf, "q_dg": self.p_dg * sin_phi}


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    series: TimeSeries | None
    i_fault: float  # A rms, steady state
    i_r: float  # A rms, resistive part (phasor solution)
    i_c: float  # A rms, capacitive part (phasor solution)
    v_touch: float  # V rms
    v_ds: float  # V rms
    i_ngr: float  # A rms
    p_ngr: float  # W
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.i_r < 0 or self.i_c < 0:
            raise ValueError("I_r and I_c must be non-negative")


@dataclass
class SweepRow:
    scenario: str
    r_ngr: float
    switch_closed: bool
    status: str = "ok"
    error: str = ""
    i_fault: float = math.nan
    i_r: float = math.nan
    i_c: float = math.nan
    v_touch: float = math.nan
    v_ds: float = math.nan
    i_ngr: float = math.nan
    p_ngr: float = math.nan

    FIELDS = ("scenario", "r_ngr", "switch_closed", "status", "i_fault", "i_r", "i_c",
              "v_touch", "v_ds", "i_ngr", "p_ngr", "error")

    @classmethod
    def from_result(cls, res: ScenarioResult) -> "SweepRow":
        c = res.config
        return cls(c.scenario, c.r_ngr, c.switch_closed, "ok", "", res.i_fault, res.i_r, res.i_c,
                   res.v_touch, res.v_ds, res.i_ngr, res.p_ngr)


@dataclass
class SweepTable:
    rows: list[SweepRow]

    def __len__(self) -> int:
        return len(self.rows)

    def get(self, scenario: str, r_ngr: float, switch_closed: bool = False) -> SweepRow:
        for r in self.rows:
            if r.scenario == scenario and r.r_ngr == r_ngr and r.switch_closed == switch_closed:
                return r
        raise KeyError((scenario, r_ngr, switch_closed))

    @property
    def scenarios(self) -> list[str]:
        return sorted({r.scenario for r in self.rows})

    @property
    def ngr_values(self) -> list[float]:
        return sorted({r.r_ngr for r in self.rows})

    def grid(self, quantity: str, switch_closed: bool = False) -> dict[str, dict[float, float]]:
        """``{scenario: {R_NGR: value}}`` for one switch state."""
        out: dict[str, dict[float, float]] = {}
        for r in self.rows:
            if r.switch_closed == switch_closed:
                out.setdefault(r.scenario, {})[r.r_ngr] = getattr(r, quantity)
        return out


@dataclass
class AdmissibilityVerdict:
    admissible: dict[float, bool]
    reasons: dict[float, list[str]]
    interval: tuple[float, float] | None
    contiguous: bool


# ---------------------------------------------------------------- simulation
def _settle(system: ShoreSystem, tol: float, cycles: int, t_min: float, t_max: float,
            frequency: float) -> float:
    """Run until every channel's one-cycle rms changes by less than ``tol``
    (relative) for ``cycles`` consecutive cycles. Channels that are
    essentially zero are judged against the largest channel of their unit."""
    period = 1.0 / frequency
    names = list(CHANNELS)
    units = [CHANNELS[n] for n in names]
    system.run(t_min, record=False)
    history: list[np.ndarray] = []
    streak = 0
    worst = names[0]
    n_max = int(math.ceil((t_max - t_min) / period))
    for _ in range(n_max):
        ts = system.run(period, record=True)
        cur = np.array([cycle_rms(ts, n, frequency, ts.t_end) for n in names])
        if history:
            prev = history[-1]
            scale = np.empty_like(cur)
            for u in set(units):
                idx = [k for k, x in enumerate(units) if x == u]
                floor = 1e-3 * max(cur[idx].max(), prev[idx].max())
                scale[idx] = np.maximum(np.maximum(cur[idx], prev[idx]), floor)
            change = np.abs(cur - prev) / np.where(scale > 0, scale, 1.0)
            worst = names[int(np.argmax(change))]
            streak = streak + 1 if change.max() < tol else 0
            if streak >= cycles:
                return system.t
        history.append(cur)
    raise InitializationError(f"no settlement within {t_max:g} s; worst channel '{worst}'", worst)


def power_flows(series: TimeSeries, frequency: float) -> dict[str, float]:
    """Signed apparent powers (VA) over the last cycle: into the ship from the
    shore cable and from the generator."""
    n = max(1, int(round(1.0 / (frequency * series.dt))))
    out = {}
    for key, cur in (("hvsc", "i_ship"), ("dg", "i_gen")):
        va = [series[f"v_bus_{p}"][-n:] for p in "abc"]
        ia = [series[f"{cur}_{p}"][-n:] for p in "abc"]
        p = sum(float(np.mean(v * i)) for v, i in zip(va, ia))
        # reactive power from the line-to-line quadrature product
        q = -float(np.mean(ia[0] * (va[2] - va[1]) + ia[1] * (va[0] - va[2]) + ia[2] * (va[1] - va[0]))) / math.sqrt(3.0)
        s = math.hypot(p, q)
        out[f"s_{key}"] = math.copysign(s, p) if s > 0 else 0.0
        out[f"p_{key}"] = p
        out[f"q_{key}"] = q
    return out


class ScenarioRunner:
    """Runs scenarios, reusing one settled operating point per scenario.

    The balanced pre-fault state does not depend on the NGR value or the
    switch position (no zero-sequence current flows), so each scenario is
    settled once and the snapshot is restored into every grounding variant.
    """

    def __init__(self, params: SystemParams | None = None):
        self.params = (params or SystemParams()).validate()
        self._settled: dict[tuple, tuple[dict, dict]] = {}

    def _base_key(self, cfg: ScenarioConfig) -> tuple:
        return (cfg.scenario, cfg.dg_on, cfg.dg_grounding, cfg.p_dg, cfg.p_load)

    def initialize(self, cfg: ScenarioConfig) -> ShoreSystem:
        """Settled system for ``cfg`` (cached per scenario)."""
        cfg.validate()
        params = cfg.system_params(self.params)
        system = ShoreSystem(params, cfg.topology())
        key = self._base_key(cfg)
        if key not in self._settled:
            system.initialize(**cfg.dispatch(params.load.power_factor))
            sol = params.solver
            t_settle = _settle(system, sol.settle_tolerance, sol.settle_cycles, sol.settle_min,
                               sol.settle_max, params.ship_frequency)
            ts = system.run(1.0 / params.ship_frequency)
            info = power_flows(ts, params.ship_frequency)
            info["v_conv_peak"] = math.sqrt(2.0) * extract_phasor(
                ts, params.ship_frequency, ts.t_end, "v_conv_a").magnitude
            info["settle_time"] = t_settle
            self._settled[key] = (system.snapshot(), info)
        else:
            system.initialized = True
        snap, info = self._settled[key]
        system.restore(snap)
        system.settle_info = dict(info)
        return system

    def run(self, cfg: ScenarioConfig, record: bool = True, decimate: int = 1) -> ScenarioResult:
        system = self.initialize(cfg)
        params = system.params
        sol = params.solver
        f = params.ship_frequency
        system.apply_fault(cfg.fault)
        t_start = system.t
        duration = cfg.fault.start + sol.post_fault
        ts = _run_chunked(system, duration)
        if system.fault_time is None:
            raise RuntimeError("fault did not close within the simulated interval")
        end = ts.t_end
        m = sol.measure_cycles

        def steady(ch):
            return cycle_rms(ts, ch, f, end, m)

        i_ngr = steady("i_ngr")
        if cfg.fault.kind == "slg":
            i_fault = steady("i_fault")
        else:
            i_fault = max(steady(f"i_conv_{p}") for p in "abc")
        dg_emf = system.machine.emf() * system.v_base if system.machine is not None else None
        ph = system.fault_phasors(cfg.fault, dg_emf=dg_emf)
        meta = {
            "config": _config_echo(cfg),
            "solver": {"dt": sol.dt, "method": sol.method, "post_fault": sol.post_fault,
                       "measure_cycles": m, "damping_steps": sol.damping_steps},
            "fault_time": system.fault_time,
            "run_start": t_start,
            "prefault": system.settle_info,
            "phasor_i_fault": ph.i_fault,
            "frequency": f,
            "v_dc0": params.converter.v_dc,
        }
        series = ts if decimate == 1 else TimeSeries(
            ts.t0, ts.dt * decimate, {k: v[::decimate] for k, v in ts.channels.items()}, ts.units)
        return ScenarioResult(cfg, series if record else None, i_fault, ph.i_r, ph.i_c,
                              steady("v_touch"), steady("v_ds"), i_ngr, i_ngr * i_ngr * cfg.r_ngr, meta)


class ScenarioRunError(RuntimeError):
    """A run aborted; ``partial`` holds the samples recorded before the failure."""

    def __init__(self, message: str, partial: TimeSeries | None):
        super().__init__(message)
        self.partial = partial


def _concat(parts: list[TimeSeries]) -> TimeSeries:
    first = parts[0]
    chans = {k: np.concatenate([first[k]] + [p[k][1:] for p in parts[1:]]) for k in first.channels}
    return TimeSeries(first.t0, first.dt, chans, first.units)


def _run_chunked(system: ShoreSystem, duration: float, chunk: float = 0.05) -> TimeSeries:
    parts: list[TimeSeries] = []
    n_total = int(round(duration / system.dt))
    n_chunk = max(1, int(round(chunk / system.dt)))
    done = 0
    while done < n_total:
        n = min(n_chunk, n_total - done)
        try:
            parts.append(system.run(n * system.dt))
        except (IntegrationError, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise ScenarioRunError(f"integration failed at t = {system.t:.6f} s: {exc}",
                                   _concat(parts) if parts else None) from exc
        done += n
    return _concat(parts)


def _config_echo(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg)
    d["fault"] = asdict(cfg.fault)
    return d


def initialize(config: ScenarioConfig, params: SystemParams | None = None) -> ShoreSystem:
    return ScenarioRunner(params).initialize(config)


def run(config: ScenarioConfig, params: SystemParams | None = None) -> ScenarioResult:
    return ScenarioRunner(params).run(config)


def sweep_ngr(base: ScenarioConfig | list[ScenarioConfig] | None = None,
              ngr_values=NGR_VALUES, switch_states=SWITCH_STATES,
              params: SystemParams | None = None, runner: ScenarioRunner | None = None) -> SweepTable:
    """One row per (scenario, NGR, switch) combination, in key order.

    ``base`` defaults to all four scenarios. A failing cell is recorded with
    its error message and the sweep carries on.
    """
    values = list(ngr_values)
    if not values:
        raise ConfigurationError("NGR value list must not be empty")
    if base is None:
        bases = [ScenarioConfig.from_table(s) for s in SCENARIOS]
    elif isinstance(base, ScenarioConfig):
        bases = [base]
    else:
        bases = list(base)
    runner = runner or ScenarioRunner(params)
    rows = []
    for b in sorted(bases, key=lambda c: c.scenario):
        for r in sorted(values):
            for sw in sorted(switch_states):
                cfg = replace(b, r_ngr=float(r), switch_closed=sw)
                try:
                    rows.append(SweepRow.from_result(runner.run(cfg, record=False)))
                except Exception as exc:  # noqa: BLE001 - recorded per cell
                    rows.append(SweepRow(cfg.scenario, cfg.r_ngr, sw, "error", f"{type(exc).__name__}: {exc}"))
    return SweepTable(rows)


def check_admissibility(table: SweepTable) -> AdmissibilityVerdict:
    """Apply the three grounding rules to every NGR value in ``table``.

    An NGR value is admissible when, in every scenario and switch state, the
    steady fault current is at most 60 A, the resistive current is at least
    1.25 times the charging current and the touch voltage is at most 30 V.
    """
    missing = set(SCENARIOS) - set(table.scenarios)
    if missing:
        raise ConfigurationError(f"sweep lacks scenarios {sorted(missing)}")
    admissible: dict[float, bool] = {}
    reasons: dict[float, list[str]] = {}
    for r_ngr in table.ngr_values:
        why = []
        for row in table.rows:
            if row.r_ngr != r_ngr:
                continue
            tag = f"{row.scenario}/{'closed' if row.switch_closed else 'open'}"
            if row.status != "ok":
                why.append(f"{tag}: run failed")
                continue
            if row.i_fault > FAULT_CURRENT_CEILING:
                why.append(f"{tag}: fault current {row.i_fault:.3g} A > {FAULT_CURRENT_CEILING:g} A")
            if row.i_r < CHARGING_MARGIN * row.i_c:
                why.append(f"{tag}: I_r {row.i_r:.4g} A < {CHARGING_MARGIN:g} x I_c {row.i_c:.4g} A")
            if row.v_touch > TOUCH_LIMIT:
                why.append(f"{tag}: touch voltage {row.v_touch:.3g} V > {TOUCH_LIMIT:g} V")
        admissible[r_ngr] = not why
        reasons[r_ngr] = why
    ok = [r for r, a in admissible.items() if a]
    interval = (min(ok), max(ok)) if ok else None
    contiguous = True
    if interval is not None:
        contiguous = all(admissible[r] for r in table.ngr_values if interval[0] <= r <= interval[1])
    return AdmissibilityVerdict(admissible, reasons, interval, contiguous)
