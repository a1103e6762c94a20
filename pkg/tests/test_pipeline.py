import json

import numpy as np
import pytest

from tdesign import problems
from tdesign.outputs import design_csv, emit_outputs, payload_json, report_payload
from tdesign.pipeline import run_pipeline
from tdesign.problem_io import load_problem


@pytest.fixture(scope="module")
def ex1_report():
    problem, pf = load_problem(problems.load("example1"))
    return run_pipeline(problem), pf


def test_pipeline_example1(ex1_report):
    report, _ = ex1_report
    assert report.verdict == "PASS"
    assert report.criterion_value == pytest.approx(0.25, abs=1e-4)
    assert report.chosen_orders == (0, 1)
    xi = report.design
    assert len(xi) == 3
    # report criterion equals min of the reported pair deltas
    deltas = [pd.value for pd in report.equivalence.pair_deltas]
    assert report.criterion_value == pytest.approx(min(deltas), abs=1e-7)


def test_payload_structure(ex1_report):
    report, pf = ex1_report
    payload = report_payload(report, pf)
    text = payload_json(payload)
    parsed = json.loads(text)
    assert parsed["schema"] == 1
    assert parsed["problem"]["models"] == ["eta1", "eta2"]
    assert parsed["problem"]["text"].startswith("schema 1")
    assert parsed["design"]["csv"].startswith("x1,weight")
    assert parsed["equivalence"]["pairs"][0]["j"] == 2
    assert parsed["hierarchy"]["trace"][0]["tau"] == 0


def test_emit_outputs(tmp_path, ex1_report):
    report, pf = ex1_report
    payload = report_payload(report, pf)
    written = emit_outputs(payload, tmp_path / "out")
    names = sorted(p.name for p in written)
    assert names == ["design.csv", "hierarchy.log", "report.json", "sensitivity_2_1.csv"]
    body = json.loads((tmp_path / "out" / "report.json").read_text())
    assert "csv" not in body["design"]
    sens = (tmp_path / "out" / "sensitivity_2_1.csv").read_text().splitlines()
    assert sens[0] == "index,x1,phi_minus_delta"
    # sensitivity at the support points vanishes to tolerance
    rows = [line.split(",") for line in sens[1:]]
    by_x = {float(x): float(v) for _, x, v in rows}
    for x in (-1.0, 0.0, 1.0):
        assert abs(by_x[x]) <= 1e-4


def test_design_csv_formatting():
    text = design_csv([(0.123456789012345, -1.0)], [1.0], 2)
    lines = text.splitlines()
    assert lines[0] == "x1,x2,weight"
    assert lines[1] == "0.123456789012,-1,1"


def test_pipeline_weighted_example6():
    problem, _ = load_problem(problems.load("example6_weighted"))
    report = run_pipeline(problem)
    assert report.criterion_value == pytest.approx(7.4, abs=0.01)
    pts = sorted(report.design.points)
    assert len(pts) == 2
    np.testing.assert_allclose(pts[0], [-1, -1, -1], atol=1e-3)
    np.testing.assert_allclose(pts[1], [1, 1, 1], atol=1e-3)
    np.testing.assert_allclose(report.design.weights, [0.5, 0.5], atol=1e-3)


def test_design_criterion_attains_relaxation_value(ex1_report):
    # exactness certificate: verified design's criterion matches the
    # relaxation optimum
    report, _ = ex1_report
    assert report.verdict == "PASS"
    rel = abs(report.criterion_value - report.solution.value) / max(1.0, abs(report.solution.value))
    assert rel <= 1e-5
