"""Report payloads and output files.

The run report is carried as a plain JSON-able dict between the service and
its clients; the CLI writes it out as ``report.json`` plus ``design.csv``,
one ``sensitivity_<j>_<k>.csv`` per active pair, and the per-order
``hierarchy.log``.  design.csv rows carry coordinates then the weight at 12
significant digits; byte-identical across runs with the same seed.
"""

from __future__ import annotations

import json
from pathlib import Path

from .pipeline import RunReport
from .problem_io import ProblemFile, serialize_problem

SCHEMA_VERSION = 1


def _sig12(v: float) -> str:
    return f"{float(v):.12g}"


def design_csv(points, weights, arity: int) -> str:
    header = ",".join(f"x{i+1}" for i in range(arity)) + ",weight"
    lines = [header]
    for pt, w in zip(points, weights):
        lines.append(",".join(_sig12(c) for c in pt) + "," + _sig12(w))
    return "\n".join(lines) + "\n"


def report_payload(report: RunReport, problem_file: ProblemFile | None = None) -> dict:
    """JSON-able run report, the service response body and report.json content."""
    p = report.problem
    sol = report.solution
    eq = report.equivalence
    payload: dict = {
        "schema": SCHEMA_VERSION,
        "problem": {
            "n": p.n,
            "d": p.d,
            "mode": p.mode,
            "models": [m.label for m in p.models],
            "pairs": [list(pk) for pk in p.pairs()],
            "text": serialize_problem(problem_file) if problem_file is not None else None,
        },
        "hierarchy": {
            "value": sol.value,
            "converged": sol.converged,
            "trace": [
                {
                    "tau": step.tau,
                    "objective": step.objective,
                    "status": step.status,
                    "iterations": step.iterations,
                    "seconds": step.seconds,
                    "block_sizes": list(step.block_sizes),
                }
                for step in sol.trace
            ],
            "log_lines": [step.log_line() for step in sol.trace],
        },
        "chosen": {"tau": report.chosen_orders[0], "r": report.chosen_orders[1]},
        "criterion_value": report.criterion_value,
        "design": None,
        "design_source": report.design_source,
        "equivalence": None,
        "warnings": list(report.warnings),
        "timings": dict(report.timings),
    }
    if report.design is not None:
        payload["design"] = {
            "points": [list(pt) for pt in report.design.points],
            "weights": list(report.design.weights),
            "csv": design_csv(report.design.points, report.design.weights, p.n),
        }
    if eq is not None:
        payload["equivalence"] = {
            "verdict": eq.verdict,
            "max_violation": eq.max_violation,
            "argmax_point": list(eq.argmax_point) if eq.argmax_point is not None else None,
            "grid_points": eq.grid_points,
            "active_pairs": [list(pk) for pk in eq.active_pairs],
            "support_slacks": {f"{j}-{k}": list(v) for (j, k), v in eq.support_slacks.items()},
            "messages": list(eq.messages),
            "pairs": [
                {
                    "j": pd.j,
                    "k": pd.k,
                    "delta": pd.value,
                    "unique_minimizer": pd.unique,
                    "active": [pd.j, pd.k] in [list(a) for a in eq.active_pairs],
                    "u_star": [float(v) for v in pd.u_star],
                    "theta_j": [float(v) for v in pd.theta_j],
                    "theta_k": [float(v) for v in pd.theta_k],
                }
                for pd in eq.pair_deltas
            ],
            "sensitivity_csv": {
                f"{j}-{k}": _sensitivity_csv(rows, p.n) for (j, k), rows in eq.sensitivity_rows.items()
            },
        }
    return payload


def _sensitivity_csv(rows, arity: int) -> str:
    header = "index," + ",".join(f"x{i+1}" for i in range(arity)) + ",phi_minus_delta"
    lines = [header]
    for row in rows:
        cells = [str(int(row[0]))] + [_sig12(v) for v in row[1:]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def payload_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def emit_outputs(payload: dict, out_dir: str | Path) -> list[Path]:
    """Write report.json, design.csv, sensitivity CSVs and the hierarchy log."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    report_path = out / "report.json"
    slim = dict(payload)
    # file payloads live in their own files, not duplicated inside report.json
    if slim.get("design"):
        slim["design"] = {k: v for k, v in slim["design"].items() if k != "csv"}
    if slim.get("equivalence"):
        slim["equivalence"] = {k: v for k, v in slim["equivalence"].items() if k != "sensitivity_csv"}
    report_path.write_text(payload_json(slim))
    written.append(report_path)

    if payload.get("design"):
        path = out / "design.csv"
        path.write_text(payload["design"]["csv"])
        written.append(path)
    if payload.get("equivalence"):
        for pair, csv_text in payload["equivalence"]["sensitivity_csv"].items():
            j, k = pair.split("-")
            path = out / f"sensitivity_{j}_{k}.csv"
            path.write_text(csv_text)
            written.append(path)
    log_path = out / "hierarchy.log"
    log_path.write_text("\n".join(payload["hierarchy"]["log_lines"]) + "\n")
    written.append(log_path)
    return written
