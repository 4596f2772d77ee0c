import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavespeed.cli import ConfigError, RunConfig, _workers, main, parse_config, serialize_config
from wavespeed.core import symmetric_lv
from wavespeed.sweep import SweepPlan

SMALL_SWEEP = {"command": "sweep", "plan": {"d_range": [1, 3, 1], "k_range": [1.5, 2.5, 1]}}


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


# --- parse_config -------------------------------------------------------------------

def test_defaults_follow_homogeneous_protocol():
    cfg = parse_config('{"command":"speed","model":{"k":2,"d":4}}')
    assert cfg.model == symmetric_lv(2.0, 4.0)
    assert (cfg.grid.length, cfg.grid.dx, cfg.stepper.dt) == (40.0, 0.02, 0.02)
    m = cfg.measurement
    assert (m.t_end, m.window, m.level, m.cadence) == (40.0, (32.0, 40.0), 0.5, 0.5)
    assert cfg.plan is None


def test_missing_command_is_named():
    with pytest.raises(ConfigError, match="command"):
        parse_config('{"model":{"k":2}}')


def test_zero_dx():
    with pytest.raises(ConfigError, match="dx must be positive"):
        parse_config('{"command":"speed","grid":{"dx":0}}')


@pytest.mark.parametrize("text,path", [
    ('{"command":"speed","extra":1}', "config"),
    ('{"command":"speed","grid":{"dx":0.02,"nx":3}}', "grid"),
    ('{"command":"speed","model":{"k":"x"}}', "model.k"),
    ('{"command":"speed","measurement":{"window":[10,50]}}', "measurement.window"),
    ('{"command":"sweep","plan":{"d_range":[0.5,2,0.5]}}', "plan"),
    ('{"command":"speed","plan":{}}', "plan"),
    ('{"command":"scenario","scenario_name":"nope"}', "scenario_name"),
    ('{"command":"launch"}', "command"),
    ('{"command":', "config"),
])
def test_errors_carry_field_path(text, path):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert str(info.value).startswith(path)


def test_plan_required_for_sweep_gets_default():
    assert parse_config('{"command":"sweep"}').plan == SweepPlan()
    assert parse_config('{"command":"contour"}').plan == SweepPlan()


configs = st.builds(
    dict,
    command=st.sampled_from(["simulate", "speed", "sweep", "contour", "validate", "scenario"]),
    k=st.floats(0, 50),
    d=st.floats(0.1, 30),
    dx=st.sampled_from([0.01, 0.02, 0.05]),
    length=st.sampled_from([10.0, 40.0]),
    dt=st.sampled_from([0.01, 0.02]),
    t_end=st.sampled_from([10.0, 40.0]),
    rescaled=st.booleans(),
)


@given(c=configs)
def test_round_trip(c):
    obj = {
        "command": c["command"],
        "model": {"k": c["k"], "d": c["d"]},
        "grid": {"length": c["length"], "dx": c["dx"]},
        "stepper": {"dt": c["dt"], "rescaled": c["rescaled"]},
        "measurement": {"t_end": c["t_end"]},
    }
    if c["command"] == "scenario":
        obj.update(scenario_name="cubic-sign-law", scenario={"r": 1, "h": 1, "k": 2, "d": 3})
    cfg = parse_config(json.dumps(obj))
    assert parse_config(serialize_config(cfg)) == cfg


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv("WAVESPEED_WORKERS", "3")
    assert _workers(None) == 3 and _workers(5) == 5
    monkeypatch.setenv("WAVESPEED_WORKERS", "zero")
    with pytest.raises(ConfigError):
        _workers(None)


# --- commands and exit codes ----------------------------------------------------------------

def test_validate_single_row(capsys):
    assert main(["validate", "--only", "rodrigo-mimura"]) == 0
    rows = [l for l in capsys.readouterr().out.splitlines() if "PASS" in l or "FAIL" in l]
    assert len(rows) == 1


def test_validate_tight_tolerance_fails(capsys):
    assert main(["validate", "--only", "rodrigo-mimura", "--tolerance", "1e-6"]) == 1
    assert "rodrigo-mimura" in capsys.readouterr().out


def test_validate_full_suite(capsys):
    assert main(["validate"]) == 0
    rows = [l for l in capsys.readouterr().out.splitlines() if " PASS " in l or " FAIL " in l]
    assert len(rows) >= 9 and all(" PASS " in l for l in rows)


def test_validate_unknown_anchor_is_config_error():
    assert main(["validate", "--only", "nope"]) == 2


def test_config_error_exit_code(tmp_path):
    assert main(["--config", _write(tmp_path, {"command": "speed", "grid": {"dx": 0}})]) == 2
    assert main([]) == 2
    assert main(["speed", "--config", _write(tmp_path, {"command": "sweep"})]) == 2


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["speed", "--output", str(blocker / "sub")]) == 2


def test_solver_failure_exit_code(tmp_path):
    cfg = {"command": "speed", "model": {"k": 500, "d": 1}, "stepper": {"dt": 0.5},
           "measurement": {"t_end": 20, "window": [10, 20], "cadence": 0.5}}
    with pytest.warns(UserWarning):
        assert main(["--config", _write(tmp_path, cfg), "--output", str(tmp_path / "o")]) == 3


def test_speed_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, {"command": "speed", "model": {"k": 2, "d": 4}})
    assert main(["--config", cfg, "--output", str(tmp_path / "o")]) == 0
    est = json.loads((tmp_path / "o" / "speed.json").read_text())
    assert est["speed"] == pytest.approx(-0.1645, abs=1e-3)
    assert {p.name for p in (tmp_path / "o").iterdir()} == {"speed.json", "trace.csv", "final.csv", "metadata.json"}


def test_simulate_snapshots(tmp_path):
    cfg = _write(tmp_path, {"command": "simulate", "measurement": {"t_end": 2, "snapshot_times": [1]}})
    assert main(["--config", cfg, "--output", str(tmp_path / "o")]) == 0
    names = {p.name for p in (tmp_path / "o").iterdir()}
    assert {"snapshot_t1.csv", "snapshot_t2.csv", "trace.csv", "metadata.json"} <= names


def test_sweep_outputs_are_deterministic(tmp_path):
    cfg = _write(tmp_path, SMALL_SWEEP)
    assert main(["--config", cfg, "--output", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main(["--config", cfg, "--output", str(tmp_path / "b"), "--workers", "2"]) == 0
    names = {p.name for p in (tmp_path / "a").iterdir()}
    assert names == {"speeds.csv", "flags.csv", "contours.json", "heatmap.pgm", "heatmap.svg", "metadata.json"}
    for name in names - {"metadata.json"}:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta = json.loads((tmp_path / "a" / "metadata.json").read_text())
    assert "created" in meta and meta["workers"] == 1


def test_contour_reuses_existing_speeds(tmp_path, monkeypatch):
    cfg = _write(tmp_path, SMALL_SWEEP)
    out = tmp_path / "a"
    assert main(["--config", cfg, "--output", str(out), "--workers", "1"]) == 0
    before = (out / "contours.json").read_bytes()
    (out / "contours.json").unlink()
    import wavespeed.cli as cli

    monkeypatch.setattr(cli, "run_sweep", lambda *a, **k: pytest.fail("sweep should not rerun"))
    contour_cfg = _write(tmp_path, {**SMALL_SWEEP, "command": "contour"}, "c.json")
    assert main(["--config", contour_cfg, "--output", str(out)]) == 0
    assert (out / "contours.json").read_bytes() == before


def test_full_resolution_flag_only_for_sweeps():
    assert main(["speed", "--full-resolution"]) == 2


def test_scenario_command(tmp_path):
    cfg = _write(tmp_path, {"command": "scenario", "scenario_name": "cubic-sign-law",
                            "scenario": {"r": 1, "h": 1, "k": 2, "d": 3}})
    assert main(["--config", cfg, "--output", str(tmp_path / "o")]) == 0
    out = json.loads((tmp_path / "o" / "cubic-sign-law.json").read_text())
    assert out["classification"] == "UInvades"


def test_scenario_bad_parameter(tmp_path):
    cfg = _write(tmp_path, {"command": "scenario", "scenario_name": "cubic-sign-law", "scenario": {"q": 1}})
    assert main(["--config", cfg, "--output", str(tmp_path / "o")]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wavespeed", "validate", "--only", "rodrigo-mimura"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS" in proc.stdout


def test_run_config_defaults_construct():
    cfg = RunConfig("speed")
    assert cfg.protocol().window == (32.0, 40.0)
