import csv
import json

import numpy as np
import pytest

from finitequench.cli import main

SMALL = """
[chain]
n = 3

[sweep]
n_values = [3, 4]
T_values = [0.01, 1.0]

[averaging]
min_window = 100.0
max_window = 200.0
"""

TAIL = """
[chain]
n = 2

[protocol]
kind = "linear_then_powerlaw"
t_star = 1.0
tail_power_p = 3.0
"""


def write(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_deterministic_summary(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path / "b"), "--jobs", "2"]) == 0
    first = (tmp_path / "a" / "summary.csv").read_bytes()
    assert first == (tmp_path / "b" / "summary.csv").read_bytes()
    assert b"\r" not in first
    rows = read_csv(tmp_path / "a" / "summary.csv")
    assert rows[0][:4] == ["N", "T", "d_eff", "bound"]
    assert len(rows) == 5
    cell = json.loads((tmp_path / "a" / "cells" / "cell_N03_T0.01.json").read_text())
    assert cell["status"] == "ok" and cell["report"]["bound_satisfied"] is True
    assert "d_eff=" in capsys.readouterr().out


def test_run_json_index(tmp_path):
    cfg = write(tmp_path, SMALL.replace("[3, 4]", "[3]").replace("[0.01, 1.0]", "[1.0]"))
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path), "--format", "json"]) == 0
    index = json.loads((tmp_path / "summary.json").read_text())
    assert len(index) == 1 and index[0]["file"] == "cells/cell_N03_T1.json"


def test_timeseries_columns(tmp_path):
    cfg = write(tmp_path, SMALL + "\n[timeseries]\npost_ramp_time = 5.0\npoints = 101\n")
    assert main(["timeseries", "--config", cfg, "--out-dir", str(tmp_path), "--T", "1.0"]) == 0
    rows = read_csv(tmp_path / "timeseries_N03_T1.csv")
    assert rows[0] == ["t", "expectation", "lambda", "in_ramp_flag"]
    # The ramp end joins the requested grid.
    times = [float(r[0]) for r in rows[1:]]
    assert len(times) == 102 and 1.0 in times
    lam = np.array([float(r[2]) for r in rows[1:]])
    assert lam[0] == 0.0 and lam[-1] == 1.0


def test_constant_hamiltonian_gives_flat_series(tmp_path):
    text = SMALL.replace("n = 3", "n = 3\nj1_final = 0.0\nj2_final = 0.0")
    cfg = write(tmp_path, text + "\n[timeseries]\npost_ramp_time = 20.0\npoints = 201\n")
    assert main(["timeseries", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    values = np.array([float(r[1]) for r in read_csv(tmp_path / "timeseries_N03_T1.csv")[1:]])
    assert np.ptp(values) <= 1e-10


def test_verify_bounds_exit_codes(tmp_path, capsys):
    cfg = write(tmp_path, TAIL)
    assert main(["verify-bounds", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "bounds_N02.csv").exists()
    assert main(["verify-bounds", "--config", cfg, "--out-dir", str(tmp_path), "--k-scale", "0.5"]) == 1
    assert "pass" in capsys.readouterr().out


def test_sudden_protocol_cannot_be_verified(tmp_path):
    cfg = write(tmp_path, "[protocol]\nkind = 'sudden'\n[chain]\nn = 2\n")
    assert main(["verify-bounds", "--config", cfg, "--out-dir", str(tmp_path)]) == 2


def test_quench_compare(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["quench-compare", "--config", cfg, "--out-dir", str(tmp_path), "--T", "1e-4"]) == 0
    summary = json.loads((tmp_path / "compare_N03_T0.0001_summary.json").read_text())
    assert summary["max_pointwise_difference"] <= 1e-3


@pytest.mark.parametrize("argv", [
    ["run", "--config", "{bad}"],
    ["run", "--config", "{missing}"],
    ["timeseries", "--config", "{ok}", "--T", "-1"],
    ["timeseries", "--config", "{ok}", "--n", "40"],
    ["run", "--config", "{ok}", "--jobs", "0"],
])
def test_configuration_errors(tmp_path, capsys, argv):
    paths = {"bad": write(tmp_path, "[chain]\nn = \n", "bad.toml"),
             "missing": str(tmp_path / "none.toml"),
             "ok": write(tmp_path, SMALL)}
    argv = [a.format(**paths) for a in argv] + ["--out-dir", str(tmp_path / "out")]
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["plot"])
