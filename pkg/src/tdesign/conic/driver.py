"""Reference external-solver driver: ``python -m tdesign.conic.driver IN OUT``.

Reads a problem in the text exchange format, solves it with the internal
interior-point method, and writes the solution file.  Serves as the
executable contract for the external-solver seam and as a drop-in for
testing the adapter end to end.
"""

from __future__ import annotations

import sys

from .solver import SolverOptions, solve
from .textio import parse_program, serialize_solution


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 2:
        print("usage: python -m tdesign.conic.driver <problem-file> <solution-file>", file=sys.stderr)
        return 2
    problem_path, solution_path = args
    try:
        with open(problem_path) as fh:
            program = parse_program(fh.read())
    except (OSError, ValueError) as exc:
        print(f"error reading problem: {exc}", file=sys.stderr)
        return 1
    result = solve(program, SolverOptions())
    with open(solution_path, "w") as fh:
        fh.write(serialize_solution(result, program.nvars))
    return 0


if __name__ == "__main__":
    sys.exit(main())
