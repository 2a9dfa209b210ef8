"""TOML configuration: system overrides plus campaign settings."""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .fault_analysis import KI_VALUES, SAT_VALUES
from .network import FaultSpec
from .params import ConfigurationError, SystemParams, with_overrides
from .scenarios import NGR_VALUES, SCENARIOS

CAMPAIGNS = ("slg-sweep", "three-phase", "sensitivity")
_TOP_KEYS = {"system", "campaigns", "slg-sweep", "three-phase", "sensitivity"}


@dataclass(frozen=True)
class SweepSettings:
    scenarios: tuple[str, ...] = SCENARIOS
    ngr: tuple[float, ...] = NGR_VALUES
    switch: tuple[bool, ...] = (False, True)

    @property
    def is_default(self) -> bool:
        return (self.scenarios == SCENARIOS and tuple(sorted(self.ngr)) == NGR_VALUES
                and tuple(sorted(self.switch)) == (False, True))


@dataclass(frozen=True)
class ThreePhaseSettings:
    scenario: str = "SC3"
    inception_angle: float | None = 90.0
    write_series: bool = True


@dataclass(frozen=True)
class SensitivitySettings:
    parameters: tuple[str, ...] = ("ki", "sat")
    ki: tuple[float, ...] = KI_VALUES
    sat: tuple[float, ...] = SAT_VALUES


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    campaigns: tuple[str, ...] = CAMPAIGNS
    sweep: SweepSettings = SweepSettings()
    three_phase: ThreePhaseSettings = ThreePhaseSettings()
    sensitivity: SensitivitySettings = SensitivitySettings()

    def as_dict(self) -> dict:
        return {"system": asdict(self.params), "campaigns": list(self.campaigns),
                "slg-sweep": asdict(self.sweep), "three-phase": asdict(self.three_phase),
                "sensitivity": asdict(self.sensitivity)}

    def checksum(self) -> str:
        """SHA-256 of the fully resolved configuration."""
        text = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()

    def fault(self) -> FaultSpec:
        return FaultSpec("three-phase", inception_angle=self.three_phase.inception_angle)


def _table(data: dict, key: str, where: str = "") -> dict:
    v = data.get(key, {})
    if not isinstance(v, dict):
        raise ConfigurationError(f"'{where + key}' must be a table")
    return v


def _check_keys(data: dict, allowed: set[str], where: str) -> None:
    for k in data:
        if k not in allowed:
            raise ConfigurationError(f"unknown key '{where}.{k}'" if where else f"unknown key '{k}'")


def _numbers(value: Any, where: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigurationError(f"'{where}' must be a non-empty array of numbers")
    out = []
    for x in value:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise ConfigurationError(f"'{where}' must contain finite numbers only")
        out.append(float(x))
    return tuple(out)


def _switch_states(value: Any) -> tuple[bool, ...]:
    names = {"open": False, "closed": True}
    if not isinstance(value, list) or not value or any(v not in names for v in value):
        raise ConfigurationError("'slg-sweep.switch' must be a non-empty array of \"open\" / \"closed\"")
    return tuple(sorted({names[v] for v in value}))


def parse_config_text(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from exc
    return build_config(data)


def parse_config(path: str | Path | None) -> RunConfig:
    """Read ``path`` (``None`` means the built-in defaults)."""
    if path is None:
        return build_config({})
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def build_config(data: dict) -> RunConfig:
    _check_keys(data, _TOP_KEYS, "")
    system = _table(data, "system")
    params = with_overrides(SystemParams(), system, "system") if system else SystemParams()
    params.validate()

    campaigns = CAMPAIGNS
    camp = _table(data, "campaigns")
    _check_keys(camp, {"run"}, "campaigns")
    if "run" in camp:
        run = camp["run"]
        if not isinstance(run, list) or any(c not in CAMPAIGNS for c in run):
            raise ConfigurationError(f"'campaigns.run' must list names from {list(CAMPAIGNS)}")
        campaigns = tuple(run)

    sw = _table(data, "slg-sweep")
    _check_keys(sw, {"scenarios", "ngr", "switch"}, "slg-sweep")
    sweep = SweepSettings()
    if "scenarios" in sw:
        sc = sw["scenarios"]
        if not isinstance(sc, list) or not sc or any(s not in SCENARIOS for s in sc):
            raise ConfigurationError(f"'slg-sweep.scenarios' must list names from {list(SCENARIOS)}")
        sweep = replace(sweep, scenarios=tuple(sorted(set(sc))))
    if "ngr" in sw:
        values = _numbers(sw["ngr"], "slg-sweep.ngr")
        if any(v <= 0 for v in values):
            raise ConfigurationError("'slg-sweep.ngr' values must be positive")
        sweep = replace(sweep, ngr=tuple(sorted(set(values))))
    elif "r_ngr" in system.get("grounding", {}):
        # a fixed NGR value replaces the sweep by a single point
        sweep = replace(sweep, ngr=(params.grounding.r_ngr,))
    if "switch" in sw:
        sweep = replace(sweep, switch=_switch_states(sw["switch"]))

    tp = _table(data, "three-phase")
    _check_keys(tp, {"scenario", "inception_angle", "write_series"}, "three-phase")
    three = ThreePhaseSettings()
    if "scenario" in tp:
        if tp["scenario"] not in SCENARIOS:
            raise ConfigurationError(f"'three-phase.scenario' must be one of {list(SCENARIOS)}")
        three = replace(three, scenario=tp["scenario"])
    if "inception_angle" in tp:
        ang = tp["inception_angle"]
        if isinstance(ang, str) and ang == "immediate":
            ang = None
        elif isinstance(ang, bool) or not isinstance(ang, (int, float)):
            raise ConfigurationError("'three-phase.inception_angle' must be a number of degrees or \"immediate\"")
        three = replace(three, inception_angle=None if ang is None else float(ang))
    if "write_series" in tp:
        if not isinstance(tp["write_series"], bool):
            raise ConfigurationError("'three-phase.write_series' must be true or false")
        three = replace(three, write_series=tp["write_series"])

    se = _table(data, "sensitivity")
    _check_keys(se, {"parameters", "ki", "sat"}, "sensitivity")
    sens = SensitivitySettings()
    if "parameters" in se:
        ps = se["parameters"]
        if not isinstance(ps, list) or not ps or any(p not in ("ki", "sat") for p in ps):
            raise ConfigurationError("'sensitivity.parameters' must list \"ki\" and/or \"sat\"")
        sens = replace(sens, parameters=tuple(dict.fromkeys(ps)))
    for key in ("ki", "sat"):
        if key in se:
            values = _numbers(se[key], f"sensitivity.{key}")
            if any(v <= 0 for v in values):
                raise ConfigurationError(f"'sensitivity.{key}' values must be positive")
            sens = replace(sens, **{key: values})
    return RunConfig(params, campaigns, sweep, three, sens)
