import json
import subprocess
import sys

import pytest

from actcap.capacity import shannon_capacity, zero_error_capacity
from actcap.cli import main
from actcap.distributions import Uniform


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, out


def test_capacity_reference_values(capsys):
    code, out = run_cli(
        ["capacity", "--dist", "uniform:2.267949192431123,5.732050807568877"],
        capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "quantity,value_bits,optimal_d"
    table = {row.split(",")[0]: row.split(",")[1:] for row in lines[1:]}
    assert float(table["c_ze"][0]) == pytest.approx(1.2075, abs=1e-4)
    assert float(table["c_sh"][0]) == pytest.approx(2.7636, abs=0.02)


def test_capacity_erasure_inf_literal(capsys):
    code, out = run_cli(["capacity", "--dist", "erasure:1,0.5"], capsys)
    assert code == 0
    table = {r.split(",")[0]: r.split(",")[1:] for r in out.strip().splitlines()[1:]}
    assert table["c_sh"][0] == "inf"
    assert float(table["c_ze"][0]) == 0.0


def test_curve_monotone_rows(capsys):
    code, out = run_cli(
        ["curve", "--dist", "uniform:1,3", "--etas", "0.01,1,2,8,64"], capsys)
    assert code == 0
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    values = [float(r[1]) for r in rows]
    assert len(values) == 5
    assert all(a >= b - 1e-7 for a, b in zip(values, values[1:]))


def test_csv_round_trip_full_precision(capsys):
    code, out = run_cli(["capacity", "--dist", "uniform:1,3"], capsys)
    assert code == 0
    table = {r.split(",")[0]: r.split(",")[1:] for r in out.strip().splitlines()[1:]}
    sh = shannon_capacity(Uniform(1, 3))
    ze = zero_error_capacity(Uniform(1, 3))
    # repr round-trips exactly, so 12 significant digits certainly survive
    assert float(table["c_sh"][0]) == sh.value_bits
    assert float(table["c_sh"][1]) == sh.optimal_d
    assert float(table["c_ze"][0]) == ze.value_bits


def test_json_structure(capsys):
    code, out = run_cli(
        ["capacity", "--dist", "erasure:1,0.5", "--format", "json"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert set(payload) == {"config", "results", "diagnostics"}
    assert payload["config"]["dist"] == "erasure:1,0.5"
    by_q = {r["quantity"]: r for r in payload["results"]}
    assert by_q["c_sh"]["value_bits"] == "inf"
    assert by_q["c_2"]["value_bits"] == pytest.approx(0.5)


def test_output_file_and_rerun_byte_identical(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    args = ["simulate", "--dist", "uniform:1,3", "--a", "2", "--d", "-0.4",
            "--horizon", "40", "--paths", "300", "--seed", "5",
            "--etas", "1,2", "--threshold-M", "1e6"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_workers_do_not_change_bytes(tmp_path):
    base = ["simulate", "--dist", "gaussian:4,1", "--a", "3", "--d", "-0.2",
            "--horizon", "60", "--paths", "1200", "--seed", "9"]
    files = []
    for i, workers in enumerate(("1", "8")):
        path = tmp_path / f"w{i}.json"
        assert main(base + ["--workers", workers, "--format", "json",
                            "--out", str(path)]) == 0
        files.append(path.read_bytes())
    # workers only appears in the echoed config; results must match
    a, b = (json.loads(f) for f in files)
    assert a["results"] == b["results"]
    assert a["diagnostics"] == b["diagnostics"]


def test_sideinfo_command(capsys):
    code, out = run_cli(
        ["sideinfo", "--dist", "uniform:0,4", "--si-bits", "2"], capsys)
    assert code == 0
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    values = [float(r[1]) for r in rows]
    assert len(values) == 3
    assert all(b >= a - 1e-7 for a, b in zip(values, values[1:]))


def test_sideinfo_explicit_cells(capsys):
    code, out = run_cli(
        ["sideinfo", "--dist", "uniform:0,4", "--si-cells", "0,1,4",
         "--eta", "2"], capsys)
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0] == "cells,capacity_bits"
    assert int(rows[1].split(",")[0]) == 2


def test_sweep_families(capsys):
    code, out = run_cli(
        ["sweep", "--ratios", "4", "--families", "uniform,gaussian,erasure"],
        capsys)
    assert code == 0
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    by_family = {r[0]: r for r in rows}
    # all three families share the second-moment value at a common ratio
    c2 = {f: float(r[5]) for f, r in by_family.items()}
    assert c2["uniform"] == pytest.approx(c2["gaussian"], abs=1e-9)
    assert c2["uniform"] == pytest.approx(c2["erasure"], abs=1e-9)
    assert by_family["erasure"][3] == "inf"
    assert float(by_family["erasure"][4]) == 0.0


def test_carryfree_command(capsys):
    code, out = run_cli(
        ["carryfree", "--gain", "cf:1,0", "--g-a", "1", "--horizon", "50",
         "--paths", "30", "--format", "json"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["diagnostics"]["zero_error_capacity"] == 1
    assert payload["diagnostics"]["shannon_capacity"] == 2
    max_degrees = [r["max_degree"] for r in payload["results"]]
    assert max(max_degrees) <= 16


def test_config_error_exit_code(capsys):
    assert main(["capacity", "--dist", "bogus:1,2"]) == 2
    assert main(["capacity", "--dist", "uniform:3,1"]) == 2
    assert main(["sideinfo", "--dist", "gaussian:0,1", "--si-bits", "2"]) == 2


def test_numerical_failure_exit_code(monkeypatch, capsys):
    import actcap.cli as cli_mod

    def boom(args):
        raise RuntimeError("forced numerical failure")

    monkeypatch.setitem(cli_mod._COMMANDS, "capacity", boom)
    assert main(["capacity", "--dist", "uniform:1,3"]) == 3


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "actcap.cli", "capacity", "--dist",
         "uniform:1,3"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("quantity,")
