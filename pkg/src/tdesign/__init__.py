"""T-optimal discrimination designs for multi-factor polynomial regression.

Computes designs maximizing the minimal squared distance between competing
polynomial mean models on a polynomially constrained design space, through
a hierarchy of semidefinite moment relaxations, with atomic design recovery
and an equivalence-theorem optimality check.
"""

__version__ = "0.1.0"

from .polynomials import MonomialBasis, Polynomial, generate_basis, parse_polynomial
from .moments import DesignMeasure, MomentVector, moments_of_design
from .discrim import ModelSpec, ParameterBox, delta_direct, verify_equivalence
from .relax import DiscriminationProblem, RunOptions, run_hierarchy
from .extract import run_extraction
from .pipeline import RunReport, run_pipeline
from .problem_io import load_problem

__all__ = [
    "MonomialBasis",
    "Polynomial",
    "generate_basis",
    "parse_polynomial",
    "MomentVector",
    "DesignMeasure",
    "moments_of_design",
    "ModelSpec",
    "ParameterBox",
    "delta_direct",
    "verify_equivalence",
    "DiscriminationProblem",
    "RunOptions",
    "run_hierarchy",
    "run_extraction",
    "RunReport",
    "run_pipeline",
    "load_problem",
    "__version__",
]
