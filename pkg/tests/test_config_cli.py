from __future__ import annotations

import csv
import json

import pytest

from shorefault.cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO, EXIT_OK, fmt, main
from shorefault.config import CAMPAIGNS, parse_config_text
from shorefault.params import ConfigurationError
from shorefault.scenarios import NGR_VALUES, SCENARIOS


# -------------------------------------------------------------------- config
def test_empty_config_gives_defaults():
    cfg = parse_config_text("")
    assert cfg.campaigns == CAMPAIGNS
    assert cfg.sweep.scenarios == SCENARIOS
    assert cfg.sweep.ngr == NGR_VALUES
    assert cfg.sweep.is_default
    assert cfg.three_phase.scenario == "SC3"


def test_fixed_ngr_replaces_sweep():
    cfg = parse_config_text("[system.grounding]\nr_ngr = 540.0\n")
    assert cfg.sweep.ngr == (540.0,)
    assert cfg.params.grounding.r_ngr == 540.0
    assert not cfg.sweep.is_default


def test_zip_shares_must_sum_to_one():
    with pytest.raises(ConfigurationError, match="sum to 1"):
        parse_config_text("[system.load]\nz = 0.7\n")


def test_unknown_key_is_named():
    with pytest.raises(ConfigurationError, match="system.grounding.r_ngx"):
        parse_config_text("[system.grounding]\nr_ngx = 540.0\n")
    with pytest.raises(ConfigurationError, match="slg-sweep.values"):
        parse_config_text("[slg-sweep]\nvalues = [1.0]\n")


def test_malformed_toml():
    with pytest.raises(ConfigurationError, match="malformed"):
        parse_config_text("[system\n")


def test_sweep_settings_parsed():
    cfg = parse_config_text('[slg-sweep]\nscenarios = ["SC3", "SC1"]\nngr = [540, 25]\nswitch = ["closed"]\n')
    assert cfg.sweep.scenarios == ("SC1", "SC3")
    assert cfg.sweep.ngr == (25.0, 540.0)
    assert cfg.sweep.switch == (True,)


@pytest.mark.parametrize("text", [
    '[slg-sweep]\nngr = []\n',
    '[slg-sweep]\nngr = [-5]\n',
    '[slg-sweep]\nswitch = ["ajar"]\n',
    '[campaigns]\nrun = ["everything"]\n',
    '[three-phase]\ninception_angle = "soon"\n',
    '[sensitivity]\nparameters = ["kp"]\n',
])
def test_invalid_settings_rejected(text):
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_immediate_inception():
    cfg = parse_config_text('[three-phase]\ninception_angle = "immediate"\n')
    assert cfg.fault().inception_angle is None


def test_checksum_tracks_content():
    a, b = parse_config_text(""), parse_config_text("")
    c = parse_config_text("[system.grounding]\nr_ngr = 540.0\n")
    assert a.checksum() == b.checksum() != c.checksum()


def test_csv_number_format():
    assert fmt(1.5) == "1.500000000e+00"
    assert fmt(float("nan")) == "nan"
    assert fmt(True) == "true"
    assert fmt(3) == "3"


# ----------------------------------------------------------------------- cli
def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[system.load]\nz = 0.7\n")
    assert main(["--config", str(bad), "--out", str(tmp_path / "out")]) == EXIT_CONFIG
    assert "sum to 1" in capsys.readouterr().err


def test_cli_missing_config_is_io_error(tmp_path):
    assert main(["--config", str(tmp_path / "missing.toml")]) == EXIT_IO


def test_cli_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--campaign", "three-phase", "--out", str(blocker / "sub")]) == EXIT_IO


def test_cli_bad_dt_is_config_error(tmp_path):
    assert main(["--dt", "-1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_cli_small_sweep_outputs(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[slg-sweep]\nscenarios = ["SC3"]\nngr = [540.0, 3500.0]\nswitch = ["open", "closed"]\n')
    out = tmp_path / "out"
    code = main(["--config", str(cfg), "--campaign", "slg-sweep", "--out", str(out)])
    assert code in (EXIT_OK, EXIT_CHECK_FAILED)
    with open(out / "slg-sweep" / "sweep.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["scenario", "r_ngr_ohm", "switch_closed", "status", "i_fault_A", "i_r_A", "i_c_A",
                       "v_touch_V", "v_ds_V", "i_ngr_A", "p_ngr_W", "error"]
    assert len(rows) == 5
    assert {r[3] for r in rows[1:]} == {"ok"}
    with open(out / "slg-sweep" / "fault_current.csv", newline="") as fh:
        grid = list(csv.reader(fh))
    assert grid[0] == ["r_ngr_ohm", "SC3_open_A", "SC3_closed_A"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["runs"][0]["campaign"] == "slg-sweep"
    paths = {f["path"] for f in manifest["files"]}
    assert "slg-sweep/sweep.csv" in paths and "slg-sweep/report.json" in paths
    report = json.loads((out / "slg-sweep" / "report.json").read_text())
    assert {c["name"] for c in report["checks"]} >= {"P_NGR = I^2 R", "fault current decreasing in R_NGR"}


def test_cli_three_phase_is_deterministic(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[three-phase]\nwrite_series = false\n")
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        main(["--config", str(cfg), "--campaign", "three-phase", "--out", str(out)])
        outs.append(out)
    for name in ("decomposition.csv", "fits.csv", "report.json"):
        assert (outs[0] / "three-phase" / name).read_bytes() == (outs[1] / "three-phase" / name).read_bytes()
    header = (outs[0] / "three-phase" / "fits.csv").read_text().splitlines()[0]
    assert header == "model,a,b,c,f,converged"
