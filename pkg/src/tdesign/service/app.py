"""FastAPI service exposing the design solver.

Endpoints:
  GET  /health                liveness and version
  GET  /problems              names of the shipped example problems
  GET  /problems/{name}       text of a shipped problem
  POST /problems/validate     parse a problem file, echo the canonical form
  POST /solve                 run the full pipeline, return the report payload
  POST /verify                equivalence-check a user-supplied design

Solves run synchronously in the request; the CLI is a thin client of this
app (in-process by default, remote with --server).
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__, problems
from ..discrim import verify_equivalence
from ..extract import ExtractionError
from ..moments import DesignMeasure, moments_of_design
from ..outputs import report_payload
from ..pipeline import PipelineError, run_pipeline
from ..problem_io import ProblemFormatError, parse_problem, serialize_problem
from ..relax import HierarchyError
from .schemas import (
    HealthResponse,
    SolveRequest,
    SolveResponse,
    ValidateRequest,
    ValidateResponse,
    VerifyRequest,
    VerifyResponse,
)

app = FastAPI(
    title="tdesign",
    version=__version__,
    description="T-optimal discrimination designs for multi-factor polynomial models",
)


def _load(problem_text: str, overrides) -> tuple:
    try:
        pf = parse_problem(problem_text)
    except ProblemFormatError as exc:
        raise HTTPException(status_code=422, detail={"stage": "parse", "message": str(exc)})
    if overrides is not None:
        data = overrides.model_dump(exclude_none=True)
        for key, val in data.items():
            pf.options[key] = val
    try:
        problem = pf.to_problem()
    except (ValueError, ProblemFormatError) as exc:
        raise HTTPException(status_code=422, detail={"stage": "build", "message": str(exc)})
    return problem, pf


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.get("/problems")
def list_problems() -> dict:
    return {"problems": problems.names()}


@app.get("/problems/{name}")
def get_problem(name: str) -> dict:
    try:
        return {"name": name, "text": problems.load(name)}
    except KeyError as exc:
        raise HTTPException(status_code=404, detail=str(exc))


@app.post("/problems/validate", response_model=ValidateResponse)
def validate(req: ValidateRequest) -> ValidateResponse:
    try:
        pf = parse_problem(req.problem)
        pf.to_problem()
    except (ProblemFormatError, ValueError) as exc:
        raise HTTPException(status_code=422, detail={"stage": "parse", "message": str(exc)})
    return ValidateResponse(
        canonical=serialize_problem(pf),
        n=pf.n,
        d=pf.d,
        mode=pf.mode,
        models=[label for label, _ in pf.models],
    )


@app.post("/solve", response_model=SolveResponse)
def solve_problem(req: SolveRequest) -> SolveResponse:
    problem, pf = _load(req.problem, req.overrides)
    try:
        report = run_pipeline(problem)
    except PipelineError as exc:
        if isinstance(exc.cause, HierarchyError):
            raise HTTPException(status_code=502, detail={"stage": "solver", "message": str(exc)})
        if isinstance(exc.cause, ExtractionError):
            raise HTTPException(status_code=502, detail={"stage": "extraction", "message": str(exc)})
        raise HTTPException(status_code=502, detail={"stage": exc.stage, "message": str(exc)})
    return SolveResponse(report=report_payload(report, pf))


@app.post("/verify", response_model=VerifyResponse)
def verify_design(req: VerifyRequest) -> VerifyResponse:
    problem, pf = _load(req.problem, None)
    try:
        design = DesignMeasure(
            [tuple(pt) for pt in req.design.points], list(req.design.weights)
        )
        eq = verify_equivalence(
            design,
            problem,
            moments_of_design(design, 2 * problem.d),
            grid_density=req.grid if req.grid is not None else problem.options.grid_density,
            seed=req.seed if req.seed is not None else problem.options.seed,
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail={"stage": "verify", "message": str(exc)})
    return VerifyResponse(
        verdict=eq.verdict,
        criterion_value=eq.criterion_value,
        max_violation=eq.max_violation,
        active_pairs=[list(pk) for pk in eq.active_pairs],
        support_slacks={f"{j}-{k}": list(v) for (j, k), v in eq.support_slacks.items()},
        messages=list(eq.messages),
        pairs=[
            {"j": pd.j, "k": pd.k, "delta": pd.value, "unique_minimizer": pd.unique}
            for pd in eq.pair_deltas
        ],
    )
