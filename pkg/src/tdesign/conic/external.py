"""Run a conic program through an external solver over the text format.

The external command is invoked as ``<command...> <problem-file>
<solution-file>``; it must read the documented problem format and write a
solution file.  The reference driver ``python -m tdesign.conic.driver``
implements the contract with the internal solver; any conforming solver
can be substituted for large instances.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from pathlib import Path

from .program import ConicProgram, SolverResult
from .textio import parse_solution, serialize_program


class ExternalSolverError(RuntimeError):
    pass


def solve_external(program: ConicProgram, command: str, timeout: float | None = None,
                   workdir: str | None = None) -> SolverResult:
    """Serialize, run the external command, parse the solution back.

    The returned point is checked against the program's constraints; a
    grossly infeasible answer is downgraded to numerical-failure rather
    than trusted.
    """
    argv = shlex.split(command)
    if not argv:
        raise ExternalSolverError("empty external solver command")
    with tempfile.TemporaryDirectory(dir=workdir, prefix="tdesign-conic-") as tmp:
        prob = Path(tmp) / "problem.txt"
        sol = Path(tmp) / "solution.txt"
        prob.write_text(serialize_program(program))
        try:
            proc = subprocess.run(
                argv + [str(prob), str(sol)],
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except FileNotFoundError as exc:
            raise ExternalSolverError(f"external solver not found: {argv[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise ExternalSolverError(f"external solver timed out after {timeout}s") from exc
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout or "").strip()[-500:]
            raise ExternalSolverError(f"external solver exited with {proc.returncode}: {tail}")
        if not sol.exists():
            raise ExternalSolverError("external solver wrote no solution file")
        result = parse_solution(sol.read_text(), program.nvars)
    if result.x is not None and result.status in ("optimal", "max-iterations"):
        viol = program.feasibility_violation(result.x)
        result.primal_residual = viol
        if result.status == "optimal" and viol > 1e-5:
            return SolverResult(
                status="numerical-failure",
                x=result.x,
                objective=result.objective,
                gap=result.gap,
                iterations=result.iterations,
                primal_residual=viol,
                message=f"external solution violates constraints by {viol:.2e}",
            )
    return result
