import csv
import json

import pytest

from src.main import main
from src.utils.result_file_manager import RUNS_FILE, SUMMARY_FILE, TRACE_FILE, VALIDATION_FILE

SMALL_CONFIG = """
[scenario]
num_vehicles = 6
num_clusters = 3
v_slots = 2

[auction]
delta = 1e-3

[run]
seed = 5
replications = 2
algorithms = ["auction", "nearest"]
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_CONFIG)
    return path


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_run_writes_results(config_file, tmp_path):
    out = tmp_path / "run"
    assert main(["run", "-c", str(config_file), "-o", str(out)]) == 0
    assert len(read_rows(out / RUNS_FILE)) == 4
    summary = json.loads((out / SUMMARY_FILE).read_text())
    assert summary["config"]["run"]["output_dir"] == str(out)


def test_seed_flag_overrides_config(config_file, tmp_path):
    main(["run", "-c", str(config_file), "-o", str(tmp_path / "a"), "--seed", "99"])
    main(["run", "-c", str(config_file), "-o", str(tmp_path / "b")])
    seeds_a = {r["seed"] for r in read_rows(tmp_path / "a" / RUNS_FILE)}
    seeds_b = {r["seed"] for r in read_rows(tmp_path / "b" / RUNS_FILE)}
    assert seeds_a.isdisjoint(seeds_b)


def test_sweep(config_file, tmp_path):
    out = tmp_path / "sweep"
    argv = ["sweep", "-c", str(config_file), "-o", str(out), "--var", "clusters", "--grid", "2,4"]
    assert main(argv) == 0
    rows = read_rows(out / RUNS_FILE)
    assert len(rows) == 2 * 2 * 2
    assert {r["num_clusters"] for r in rows} == {"2", "4"}


def test_validate(tmp_path):
    out = tmp_path / "validate"
    assert main(["validate", "-n", "10", "--delta", "1e-3", "-o", str(out)]) == 0
    assert len(read_rows(out / VALIDATION_FILE)) == 10


def test_trace(config_file, tmp_path):
    out = tmp_path / "trace"
    assert main(["trace", "-c", str(config_file), "-o", str(out), "--replication", "1"]) == 0
    lines = (out / TRACE_FILE).read_text().splitlines()
    assert json.loads(lines[-1])["bids"] == []


def test_invalid_config_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("[auction]\ndelta = -1\n")
    assert main(["run", "-c", str(path), "-o", str(tmp_path / "out")]) == 1
    assert "auction.delta" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_bad_sweep_grid_exits_nonzero(config_file, tmp_path):
    argv = ["sweep", "-c", str(config_file), "--var", "epsilon", "--grid", "0.1,2"]
    assert main(argv + ["-o", str(tmp_path / "out")]) == 1


def test_missing_command():
    with pytest.raises(SystemExit):
        main([])
