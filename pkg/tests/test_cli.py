"""Command-line entry points, exercised in-process via main()."""

import json

import numpy as np
import pytest

from gasloc.cli import main
from gasloc.harness import read_log

SCENARIO = """\
name: cli_smoke
grid:
  width_cells: 12
  height_cells: 9
  cell_size: 0.5
  wind: [0.04, 0.0]
source:
  cell: [3, 4]
robot:
  start: [4.75, 1.25]
solver:
  source_strength: 50.0
features:
  span_fraction: 0.02
estimation:
  feature: rank
  sampling_mode: stop_sense_go
  max_iterations: 5
"""


@pytest.fixture()
def scenario_path(tmp_path):
    path = tmp_path / "smoke.yaml"
    path.write_text(SCENARIO)
    return path


def test_run_prints_a_record(scenario_path, capsys):
    assert main(["run", "--scenario", str(scenario_path),
                 "--feature", "value", "--seed", "3"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["record"] == "trial"
    assert record["feature"] == "value"
    assert record["seed"] == 3
    assert record["status"] == "ok"


def test_run_sensor_override(scenario_path, capsys):
    assert main(["run", "--scenario", str(scenario_path),
                 "--sensor", "sensor_II"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["sensor"] == "sensor_II"
    assert record["calibrated"] is False


def test_run_dump_posteriors(scenario_path, tmp_path, capsys):
    dump = tmp_path / "dumps" / "one.npz"
    assert main(["run", "--scenario", str(scenario_path),
                 "--dump-posteriors", str(dump)]) == 0
    assert dump.exists()
    with np.load(dump) as data:
        assert data["posteriors"].ndim == 3


def test_run_missing_scenario_is_a_config_error(tmp_path, capsys):
    code = main(["run", "--scenario", str(tmp_path / "absent.yaml")])
    assert code == 2
    assert "configuration error" in capsys.readouterr().err


def test_bench_writes_logs(scenario_path, tmp_path, capsys):
    cfg = tmp_path / "bench.yaml"
    cfg.write_text("scenario: smoke.yaml\n"
                   "features: [rank]\n"
                   "sensors: [calibrated]\n"
                   "trials: 2\n"
                   "seed: 1\n")
    out = tmp_path / "results"
    assert main(["bench", "--config", str(cfg), "--out", str(out)]) == 0
    records = read_log(out / "results.jsonl")
    assert len(records) == 2
    assert (out / "summary.json").exists()
    assert "results.jsonl" in capsys.readouterr().out


def test_solve_plume_writes_field(scenario_path, tmp_path, capsys):
    out = tmp_path / "field.npz"
    assert main(["solve-plume", "--scenario", str(scenario_path),
                 "--source", "3,4", "--out", str(out)]) == 0
    with np.load(out) as data:
        assert data["concentration"].shape == (9, 12)
        assert tuple(data["source_cell"]) == (3, 4)
        assert float(data["residual"]) < 1e-6


def test_solve_plume_rejects_bad_source(scenario_path, tmp_path, capsys):
    code = main(["solve-plume", "--scenario", str(scenario_path),
                 "--source", "roughly-the-middle", "--out", str(tmp_path / "x.npz")])
    assert code == 2


def test_solve_plume_runtime_failure_exit_code(scenario_path, tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(SCENARIO + "\n")
    text = bad.read_text().replace("solver:\n  source_strength: 50.0",
                                   "solver:\n  tolerance: 1.0e-14\n  max_sweeps: 10")
    bad.write_text(text)
    code = main(["solve-plume", "--scenario", str(bad),
                 "--source", "3,4", "--out", str(tmp_path / "x.npz")])
    assert code == 3
    assert "runtime error" in capsys.readouterr().err
