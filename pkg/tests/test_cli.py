import json
import subprocess
import sys
from pathlib import Path

import pytest

from tdesign import problems

CLI = [sys.executable, "-m", "tdesign.cli"]


def run_cli(*args, **kw):
    return subprocess.run(CLI + list(args), capture_output=True, text=True, **kw)


@pytest.fixture(scope="module")
def ex1_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("ex1")
    proc = run_cli("run", "example1", "--out", str(out))
    return proc, out


def test_run_example1_exit_code_and_files(ex1_run):
    proc, out = ex1_run
    assert proc.returncode == 0, proc.stderr
    for name in ("report.json", "design.csv", "hierarchy.log", "sensitivity_2_1.csv"):
        assert (out / name).exists(), name
    report = json.loads((out / "report.json").read_text())
    assert report["equivalence"]["verdict"] == "PASS"
    assert abs(report["criterion_value"] - 0.25) < 1e-4
    # report.json does not duplicate the CSV payloads
    assert "csv" not in report["design"]
    design_lines = (out / "design.csv").read_text().splitlines()
    assert design_lines[0] == "x1,weight"
    assert len(design_lines) == 4


def test_run_deterministic_outputs(ex1_run, tmp_path):
    _, first = ex1_run
    out2 = tmp_path / "again"
    proc = run_cli("run", "example1", "--out", str(out2))
    assert proc.returncode == 0
    assert (out2 / "design.csv").read_text() == (first / "design.csv").read_text()
    r1 = json.loads((first / "report.json").read_text())
    r2 = json.loads((out2 / "report.json").read_text())
    r1.pop("timings"); r2.pop("timings")
    t1 = [s.pop("seconds") for s in r1["hierarchy"]["trace"]]
    _ = [s.pop("seconds") for s in r2["hierarchy"]["trace"]]
    assert r1 == r2


def test_run_rejects_bad_file(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("schema 1\nn 1\nd 1\nbroken line\n")
    proc = run_cli("run", str(bad), "--out", str(tmp_path / "o"))
    assert proc.returncode == 1
    assert "line 4" in proc.stderr


def test_run_unknown_source():
    proc = run_cli("run", "never-such-problem")
    assert proc.returncode != 0
    assert "neither a file nor a shipped problem" in proc.stderr


def test_run_external_solver_failure_exit_4(tmp_path):
    proc = run_cli("run", "example1", "--solver", "external:/bin/false", "--out", str(tmp_path / "o"))
    assert proc.returncode == 4
    assert "failure" in proc.stderr


def test_run_extraction_failure_exit_2(tmp_path):
    # extraction cannot be flat at r = 1 for this problem, and a 3-model
    # problem has no certificate fallback
    proc = run_cli("run", "example6", "--r-max", "1", "--tau-max", "0", "--out", str(tmp_path / "o"))
    assert proc.returncode == 2, proc.stderr


def test_identical_models_degenerate_run(tmp_path):
    text = """schema 1
n 1
d 1
constraint 1 - x1^2
model a
  term 1 range: [0, 2]
  term x1 range: [0, 2]
model b
  term 1 range: [0, 2]
  term x1 range: [0, 2]
mode minmax
"""
    f = tmp_path / "degenerate.txt"
    f.write_text(text)
    proc = run_cli("run", str(f), "--out", str(tmp_path / "o"))
    assert proc.returncode == 0
    assert "indistinguishable" in proc.stderr
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["criterion_value"] == 0.0
    assert report["design"] is None


def test_validate_command():
    proc = run_cli("validate", "example1")
    assert proc.returncode == 0
    assert proc.stdout.startswith("schema 1")


def test_verify_command_pass_and_fail(tmp_path, ex1_run):
    _, out = ex1_run
    proc = run_cli("verify", "example1", "--design", str(out / "design.csv"))
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout

    perturbed = tmp_path / "perturbed.csv"
    perturbed.write_text("x1,weight\n-1,0.4\n0,0.2\n1,0.4\n")
    proc = run_cli("verify", "example1", "--design", str(perturbed))
    assert proc.returncode == 3
    assert "FAIL" in proc.stdout


def test_problems_and_show():
    proc = run_cli("problems")
    assert proc.returncode == 0
    assert "example1" in proc.stdout.split()
    proc = run_cli("show", "example1")
    assert proc.returncode == 0
    assert proc.stdout == problems.load("example1")


def test_weighted_flag_switches_mode(tmp_path):
    from tdesign import problems as shipped

    # a min-mode file carrying weight lines; the flag flips it to weighted
    text = shipped.load("example6_weighted").replace("mode weighted", "mode minmax")
    f = tmp_path / "six.txt"
    f.write_text(text)
    proc = run_cli("run", str(f), "--weighted", "--tau-max", "1", "--out", str(tmp_path / "o"))
    assert proc.returncode in (0, 3), proc.stderr
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["problem"]["mode"] == "weighted"
    assert abs(report["criterion_value"] - 7.4) < 0.01

    # flipping a file without weight lines is a parse error
    proc = run_cli("run", "example6", "--weighted", "--out", str(tmp_path / "o2"))
    assert proc.returncode == 1
    assert "weighted mode needs weight lines" in proc.stderr
