"""Batch front end: ``shorefault --campaign NAME --out DIR``.

Exit codes: 0 all checks passed, 1 a result check failed, 2 usage or
configuration error, 3 file-system error, 4 simulation failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import CAMPAIGNS, RunConfig, parse_config
from .fault_analysis import (
    REFERENCE_CURRENT,
    REFERENCE_DC_VOLTAGE,
    RESIDUAL_LIMIT,
    SensitivityRow,
    analyse_three_phase,
    check_trends,
    run_three_phase,
    sensitivity_sweep,
)
from .params import ConfigurationError, with_overrides
from .scenarios import (
    ScenarioConfig,
    ScenarioRunner,
    SweepRow,
    SweepTable,
    check_admissibility,
    sweep_ngr,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SIMULATION = 4

# reference NGR power ratings (kW) by scenario, for R_NGR = 25 ... 3500 ohm
REFERENCE_NGR = (25.0, 75.0, 125.0, 200.0, 300.0, 540.0, 1000.0, 3500.0)
REFERENCE_NGR_KW = {
    "SC1": (1591.2, 533.2, 320.2, 200.2, 133.5, 74.2, 40.1, 11.5),
    "SC2": (1361.9, 482.7, 298.7, 187.2, 125.3, 70.0, 39.0, 10.7),
    "SC3": (1352.6, 481.7, 297.7, 186.2, 124.2, 69.0, 37.2, 10.6),
    "SC4": (1558.8, 526.2, 316.4, 198.0, 132.1, 73.4, 39.6, 11.3),
}


class SimulationFailure(RuntimeError):
    pass


def fmt(x) -> str:
    """CSV cell: scientific notation for floats, plain text otherwise."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.9e}"
    if isinstance(x, int):
        return str(x)
    return str(x)


class Writer:
    """Collects output files and their checksums for the manifest."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[dict] = []

    def write_text(self, rel: str, text: str) -> None:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        path.write_bytes(data)
        self.files.append({"path": rel, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})

    def write_csv(self, rel: str, header: list[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
        self.write_text(rel, buf.getvalue())

    def write_json(self, rel: str, obj) -> None:
        self.write_text(rel, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, float):
        return None if math.isnan(x) else x
    if hasattr(x, "item"):
        return x.item()
    return str(x)


def _clean(x):
    """JSON-safe copy with NaN and infinity mapped to null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if hasattr(x, "item"):
        return _clean(x.item())
    return x


def _check(name: str, passed: bool, detail: str = "") -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


# ------------------------------------------------------------------ campaigns
def campaign_slg_sweep(cfg: RunConfig, out: Writer) -> tuple[list[dict], dict]:
    sw = cfg.sweep
    runner = ScenarioRunner(cfg.params)
    bases = [ScenarioConfig.from_table(s) for s in sw.scenarios]
    table = sweep_ngr(bases, sw.ngr, sw.switch, runner=runner)
    failed = [r for r in table.rows if r.status != "ok"]
    out.write_csv("slg-sweep/sweep.csv",
                  ["scenario", "r_ngr_ohm", "switch_closed", "status", "i_fault_A", "i_r_A", "i_c_A",
                   "v_touch_V", "v_ds_V", "i_ngr_A", "p_ngr_W", "error"],
                  [[getattr(r, f) for f in SweepRow.FIELDS] for r in table.rows])
    _write_grids(table, out)
    checks = _sweep_checks(cfg, table)
    report = {"rows": len(table.rows), "failed_runs": len(failed)}
    if set(sw.scenarios) == {"SC1", "SC2", "SC3", "SC4"}:
        verdict = check_admissibility(table)
        report["admissible"] = {fmt(k): v for k, v in verdict.admissible.items()}
        report["reasons"] = {fmt(k): v for k, v in verdict.reasons.items()}
        report["interval_ohm"] = list(verdict.interval) if verdict.interval else None
        report["contiguous"] = verdict.contiguous
        if sw.is_default:
            checks.append(_check("admissible interval is [125, 3500] ohm",
                                 verdict.interval == (125.0, 3500.0) and verdict.contiguous,
                                 f"found {verdict.interval}"))
    if failed:
        raise SimulationFailure(f"{len(failed)} sweep cells failed; first: {failed[0].error}")
    return checks, report


def _write_grids(table: SweepTable, out: Writer) -> None:
    quantities = (("fault_current", "i_fault", "A"), ("touch_voltage", "v_touch", "V"),
                  ("v_ds", "v_ds", "V"), ("ngr_power", "p_ngr", "W"), ("resistive_current", "i_r", "A"),
                  ("charging_current", "i_c", "A"))
    switch_states = sorted({r.switch_closed for r in table.rows})
    for fname, q, unit in quantities:
        cols = [(s, sw) for s in table.scenarios for sw in switch_states]
        header = ["r_ngr_ohm"] + [f"{s}_{'closed' if sw else 'open'}_{unit}" for s, sw in cols]
        rows = []
        for r in table.ngr_values:
            rows.append([r] + [table.get(s, r, sw).__dict__[q] for s, sw in cols])
        out.write_csv(f"slg-sweep/{fname}.csv", header, rows)


def _sweep_checks(cfg: RunConfig, table: SweepTable) -> list[dict]:
    ok = [r for r in table.rows if r.status == "ok"]
    checks = []
    vmax = max((max(r.v_touch, r.v_ds) for r in ok), default=math.nan)
    checks.append(_check("touch and switch voltages <= 30 V", vmax <= 30.0, f"max {vmax:.4g} V"))
    open_max = max((r.v_touch for r in ok if not r.switch_closed), default=0.0)
    checks.append(_check("touch voltage <= 0.1 V with the switch open", open_max <= 0.1, f"max {open_max:.4g} V"))
    ident = max((abs(r.p_ngr - r.i_ngr ** 2 * r.r_ngr) / max(r.p_ngr, 1e-300) for r in ok), default=0.0)
    checks.append(_check("P_NGR = I^2 R", ident <= 1e-9, f"max relative error {ident:.3g}"))
    if len(cfg.sweep.switch) == 2:
        worst = 0.0
        for r in ok:
            if r.switch_closed:
                continue
            try:
                other = table.get(r.scenario, r.r_ngr, True)
            except KeyError:
                continue
            worst = max(worst, abs(other.i_fault - r.i_fault) / r.i_fault)
        checks.append(_check("fault current independent of switch state (< 1%)", worst < 0.01,
                             f"max difference {100 * worst:.3f}%"))
    mono = True
    for s in table.scenarios:
        for sw in sorted({r.switch_closed for r in ok}):
            vals = [table.get(s, r, sw).i_fault for r in table.ngr_values]
            mono &= all(b < a for a, b in zip(vals, vals[1:]))
    checks.append(_check("fault current decreasing in R_NGR", mono))
    if cfg.sweep.is_default:
        worst = 0.0
        for s, ref in REFERENCE_NGR_KW.items():
            for r, kw in zip(REFERENCE_NGR, ref):
                worst = max(worst, abs(table.get(s, r, False).p_ngr / 1e3 / kw - 1.0))
        checks.append(_check("NGR power within 15% of the reference table", worst <= 0.15,
                             f"max deviation {100 * worst:.2f}%"))
    return checks


def campaign_three_phase(cfg: RunConfig, out: Writer) -> tuple[list[dict], dict]:
    params = cfg.params
    scen = ScenarioConfig.from_table(cfg.three_phase.scenario, fault=cfg.fault())
    res = run_three_phase(params, scen)
    a = analyse_three_phase(res, params)
    dec = a["decomposition"]
    ts = res.series
    if cfg.three_phase.write_series:
        t = ts.time
        for name, values in ts.channels.items():
            unit = ts.units.get(name, "")
            out.write_csv(f"three-phase/series/{name}.csv", ["time_s", f"{name}_{unit}"], zip(t, values))
    ma = dec.decaying
    out.write_csv("three-phase/decomposition.csv",
                  ["time_s"] + [f"i_dec_{p}_A" for p in "abc"],
                  zip(ma.time, *(ma[f"i_conv_{p}"] for p in "abc")))
    fi, fv = dec.fit_current, dec.fit_voltage
    coeffs = {
        "sine": dict(fi.coefficients, converged=fi.converged) if fi else None,
        "ripple": dict(fv.coefficients, converged=fv.converged) if fv else None,
        "i_s_peak_A": dec.i_s,
        "i_s_ratio": a["i_s_ratio"],
        "v_prefault_peak_V": a["v_prefault"],
        "residual": dec.residual,
        "tau_check": a["tau"].__dict__,
        "diagnostics": dec.diagnostics,
        "phases_consistent": dec.phases_consistent,
        "v_dc_approach": dec.metadata.get("v_dc_approach"),
    }
    out.write_csv("three-phase/fits.csv", ["model", "a", "b", "c", "f", "converged"],
                  [["sine", abs(fi["a"]), fi["b"], math.nan, fi["f"], fi.converged] if fi else ["sine"] + [math.nan] * 4 + [False],
                   ["ripple", abs(fv["a"]), fv["b"], fv["c"], fv["f"], fv.converged] if fv else ["ripple"] + [math.nan] * 4 + [False]])
    checks = [
        _check("decomposition residual < 5%", dec.residual < RESIDUAL_LIMIT, f"{100 * dec.residual:.2f}%"),
        _check("time constants equal within 10%", a["tau"].passed,
               f"b1 {a['tau'].b1:.4g}, b2 {a['tau'].b2:.4g} ({a['tau'].verdict})"),
        _check("symmetric current within 10% of V/X_comm", abs(a["i_s_ratio"] - 1.0) <= 0.10,
               f"ratio {a['i_s_ratio']:.4f}"),
    ]
    ref3, ref4 = REFERENCE_CURRENT[("ki", 12.0)], REFERENCE_DC_VOLTAGE[("ki", 12.0)]
    if fi and fv:
        within = (abs(fi["b"] / ref3[1] - 1) <= 0.2 and abs(fi["f"] / ref3[2] - 1) <= 0.2
                  and abs(fv["b"] / ref4[1] - 1) <= 0.2 and abs(fv["c"] / ref4[2] - 1) <= 0.2
                  and abs(fv["f"] / ref4[3] - 1) <= 0.2)
    else:
        within = False
    checks.append(_check("baseline coefficients within 20% of the reference row", within))
    return checks, _clean(coeffs)


def campaign_sensitivity(cfg: RunConfig, out: Writer, only: str | None = None) -> tuple[list[dict], dict]:
    params = cfg.params
    scen = ScenarioConfig.from_table(cfg.three_phase.scenario, fault=cfg.fault())
    checks, report = [], {}
    names = (only,) if only else cfg.sensitivity.parameters
    errors = []
    for name in names:
        values = getattr(cfg.sensitivity, name)
        rows = sensitivity_sweep(name, values, params, scen)
        errors += [r for r in rows if r.status == "error"]
        out.write_csv(f"sensitivity/{name}.csv",
                      ["parameter", "value", "a2_A", "b2_per_s", "f2_Hz", "a1_V", "b1_per_s", "c1", "f1_Hz",
                       "i_s_ratio", "residual", "status", "error"],
                      [[getattr(r, f) for f in SensitivityRow.FIELDS] for r in rows])
        trends = check_trends(rows)
        report[name] = {"trends": trends, "rows": [_clean(r.__dict__) for r in rows]}
        checks += [_check(f"{name}: {k}", v) for k, v in trends.items()]
    if errors:
        raise SimulationFailure(f"{len(errors)} sensitivity runs failed; first: {errors[0].error}")
    return checks, report


# ------------------------------------------------------------------ driver
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shorefault", description=__doc__.splitlines()[0])
    p.add_argument("--config", metavar="PATH", help="TOML configuration file (defaults when omitted)")
    p.add_argument("--campaign", choices=CAMPAIGNS, help="run one campaign instead of the configured list")
    p.add_argument("--out", metavar="DIR", default="results", help="output directory (default: results)")
    p.add_argument("--dt", metavar="SECONDS", type=float, help="override the integration step")
    p.add_argument("--param", choices=("ki", "sat"), help="sensitivity parameter (default: both)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def run_campaigns(cfg: RunConfig, campaigns, out_dir: Path, param: str | None = None) -> int:
    writer = Writer(out_dir)
    runs = []
    status = EXIT_OK
    for name in campaigns:
        try:
            if name == "slg-sweep":
                checks, report = campaign_slg_sweep(cfg, writer)
            elif name == "three-phase":
                checks, report = campaign_three_phase(cfg, writer)
            else:
                checks, report = campaign_sensitivity(cfg, writer, param)
        except SimulationFailure as exc:
            runs.append({"campaign": name, "status": "simulation-error", "error": str(exc)})
            status = EXIT_SIMULATION
            continue
        passed = all(c["passed"] for c in checks)
        writer.write_json(f"{name}/report.json", {"campaign": name, "checks": checks, "passed": passed,
                                                  "results": _clean(report)})
        runs.append({"campaign": name, "status": "passed" if passed else "check-failed",
                     "checks_failed": [c["name"] for c in checks if not c["passed"]]})
        if not passed and status == EXIT_OK:
            status = EXIT_CHECK_FAILED
        for c in checks:
            print(f"[{'PASS' if c['passed'] else 'FAIL'}] {name}: {c['name']} {c['detail']}".rstrip())
    manifest = {
        "artifact_version": __version__,
        "config_sha256": cfg.checksum(),
        "solver": {"dt": cfg.params.solver.dt, "method": cfg.params.solver.method},
        "runs": runs,
        "files": sorted(writer.files, key=lambda f: f["path"]),
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (out_dir / "manifest.json").write_text(text, encoding="utf-8")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.dt is not None:
            params = with_overrides(cfg.params, {"solver": {"dt": args.dt}})
            cfg = replace(cfg, params=params.validate())
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_IO
    campaigns = (args.campaign,) if args.campaign else cfg.campaigns
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        return run_campaigns(cfg, campaigns, out_dir, args.param)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"file-system error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
