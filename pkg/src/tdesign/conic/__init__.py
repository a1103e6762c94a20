from .program import ConicProgram, PsdBlock, SolverResult
from .solver import SolverOptions, solve
from .external import ExternalSolverError, solve_external
from .textio import FormatError, parse_program, parse_solution, serialize_program, serialize_solution

__all__ = [
    "ConicProgram",
    "PsdBlock",
    "SolverResult",
    "SolverOptions",
    "solve",
    "solve_external",
    "ExternalSolverError",
    "FormatError",
    "parse_program",
    "parse_solution",
    "serialize_program",
    "serialize_solution",
]
