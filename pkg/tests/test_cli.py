import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from edca11p.cli import CSV_COLUMNS, run
from edca11p.config import ConfigError, load_scenario, parse_scenario

SMALL_CONFIG = """
schema_version: 1
scenario:
  n_vehicles: [5, 10]
  queue_depth: 10
traffic:
  cam_period_ms: 100
  event_rate_hz: 1
  repetition_k: 5
  denm_rep_interval_ms: 10
  mhd_rate_hz: 10
sim:
  horizon_slots: 60000
  warmup_slots: 2000
  seed: 7
"""


@pytest.fixture()
def small_config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL_CONFIG)
    return str(path)


def test_bundled_configs_load():
    hw = load_scenario("highway.default")
    assert hw.sweep() == tuple(range(10, 301, 10))
    hl = load_scenario("highload")
    assert hl.traffic.event_rate_lambda == 10.0
    assert hl.traffic.repetition_k == 10


def test_analytic_run_schema(small_config, tmp_path):
    out = tmp_path / "out.csv"
    assert run(small_config, mode="analytic", out_path=str(out), quiet=True, workers=1) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "5" and first[1] == "analytic"
    assert len(first) == len(CSV_COLUMNS)


def test_both_mode_rows_ordered(small_config, tmp_path):
    out = tmp_path / "out.csv"
    assert run(small_config, mode="both", out_path=str(out), quiet=True, workers=2) == 0
    rows = [line.split(",")[:2] for line in out.read_text().splitlines()[1:]]
    assert rows == [["5", "analytic"], ["5", "sim"], ["10", "analytic"], ["10", "sim"]]


def test_byte_identical_reruns(small_config, tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert run(small_config, mode="both", out_path=str(out1), quiet=True, workers=2) == 0
    assert run(small_config, mode="both", out_path=str(out2), quiet=True, workers=1) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_empty_sweep_rejected(tmp_path, capsys):
    path = tmp_path / "empty.yaml"
    path.write_text("schema_version: 1\nscenario:\n  n_vehicles: []\n")
    assert run(str(path), mode="analytic", out_path="-") == 2
    assert "no scenarios" in capsys.readouterr().err


def test_unknown_config_rejected(capsys):
    assert run("no-such-config", mode="analytic", out_path="-") == 2
    assert "not a file" in capsys.readouterr().err


def test_yaml_error_reports_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("schema_version: 1\nscenario: [unclosed\n")
    with pytest.raises(ConfigError) as exc:
        load_scenario(str(path))
    assert "line" in str(exc.value)


def test_schema_version_enforced():
    with pytest.raises(ConfigError) as exc:
        parse_scenario({"schema_version": 99})
    assert "schema_version" in str(exc.value)


def test_field_error_names_path():
    with pytest.raises(ConfigError) as exc:
        parse_scenario({"schema_version": 1, "edca": {"aifsn": {"vo": 9, "vi": 3, "be": 6, "bk": 9}}})
    assert "edca" in str(exc.value)


def test_nonconvergence_exit_code(tmp_path, capsys):
    path = tmp_path / "hard.yaml"
    path.write_text(
        "schema_version: 1\n"
        "scenario: {n_vehicles: 80}\n"
        "solver: {tolerance: 1.0e-13, max_iterations: 3, damping: 0.5}\n"
    )
    out = tmp_path / "out.csv"
    assert run(str(path), mode="analytic", out_path=str(out), quiet=True, workers=1) == 3
    err = capsys.readouterr().err
    assert "n=80" in err
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_oracle_flag_matches_closed_form(tmp_path):
    path = tmp_path / "one.yaml"
    path.write_text("schema_version: 1\nscenario: {n_vehicles: 15}\n")
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert run(str(path), mode="analytic", out_path=str(a), quiet=True, workers=1) == 0
    assert run(str(path), mode="analytic", out_path=str(b), quiet=True, workers=1,
               use_oracle=True) == 0
    va = np.array([float(x) for x in a.read_text().splitlines()[1].split(",")[2:]])
    vb = np.array([float(x) for x in b.read_text().splitlines()[1].split(",")[2:]])
    assert np.max(np.abs(va - vb)) < 1e-6


def test_console_entry_point(small_config, tmp_path):
    out = tmp_path / "cli.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "edca11p.cli", "--config", small_config,
         "--mode", "analytic", "--out", str(out), "--quiet", "--workers", "1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert out.exists()
