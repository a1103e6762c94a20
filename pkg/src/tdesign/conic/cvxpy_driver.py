"""Optional external driver backed by cvxpy: ``python -m tdesign.conic.cvxpy_driver IN OUT``.

Implements the external-solver contract with whatever conic solver cvxpy
has available (Clarabel preferred), for instances where the internal dense
method is too slow.  cvxpy is not a package dependency; the driver fails
with a clear message when it is missing.
"""

from __future__ import annotations

import sys

import numpy as np

from .program import ConicProgram, SolverResult
from .textio import parse_program, serialize_solution


def solve_with_cvxpy(program: ConicProgram) -> SolverResult:
    try:
        import cvxpy as cp
        import scipy.sparse as sp
    except ImportError as exc:  # pragma: no cover - environment dependent
        raise RuntimeError("cvxpy is not installed; install it or use the internal solver") from exc

    n = program.nvars
    x = cp.Variable(n)
    constraints = []
    A, b = program.eq_matrix()
    if A.shape[0]:
        constraints.append(A @ x == b)
    G, h = program.nonneg_matrix()
    if G.shape[0]:
        constraints.append(G @ x + h >= 0)
    for blk in program.psd_blocks:
        m = blk.size
        data, rows, cols = [], [], []
        const = np.zeros((m, m))
        for i, j, var, val in blk.entries:
            if var is None:
                const[i, j] += val
                if i != j:
                    const[j, i] += val
            else:
                rows.append(i * m + j)
                cols.append(var)
                data.append(val)
                if i != j:
                    rows.append(j * m + i)
                    cols.append(var)
                    data.append(val)
        Amap = sp.csc_matrix((data, (rows, cols)), shape=(m * m, n))
        expr = cp.reshape(Amap @ x, (m, m), order="C") + const
        constraints.append(0.5 * (expr + expr.T) >> 0)
    objective = cp.Maximize(program.objective @ x)
    prob = cp.Problem(objective, constraints)
    solver = cp.CLARABEL if "CLARABEL" in cp.installed_solvers() else None
    try:
        prob.solve(solver=solver)
    except cp.error.SolverError as exc:
        return SolverResult("numerical-failure", None, None, float("nan"), 0, message=str(exc))
    status_map = {
        "optimal": "optimal",
        "optimal_inaccurate": "max-iterations",
        "infeasible": "infeasible",
        "infeasible_inaccurate": "infeasible",
        "unbounded": "unbounded",
        "unbounded_inaccurate": "unbounded",
    }
    status = status_map.get(prob.status, "numerical-failure")
    xv = None if x.value is None else np.asarray(x.value, dtype=float)
    return SolverResult(
        status=status,
        x=xv,
        objective=None if prob.value is None else float(prob.value),
        gap=float("nan"),
        iterations=0,
        primal_residual=program.feasibility_violation(xv) if xv is not None else float("nan"),
        message=f"cvxpy status {prob.status}",
    )


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 2:
        print("usage: python -m tdesign.conic.cvxpy_driver <problem-file> <solution-file>", file=sys.stderr)
        return 2
    with open(args[0]) as fh:
        program = parse_program(fh.read())
    result = solve_with_cvxpy(program)
    with open(args[1], "w") as fh:
        fh.write(serialize_solution(result, program.nvars))
    return 0


if __name__ == "__main__":
    sys.exit(main())
