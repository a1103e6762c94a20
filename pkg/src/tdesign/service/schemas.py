"""Request and response models of the design service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class SolveOverrides(BaseModel):
    """Optional per-request overrides of the problem file's run options."""

    tau_max: int | None = Field(default=None, ge=0)
    r_max: int | None = Field(default=None, ge=1)
    grid: int | None = Field(default=None, ge=2)
    seed: int | None = None
    solver: str | None = None
    extraction_solver: str | None = None
    stall_tol: float | None = Field(default=None, gt=0)
    gap_tol: float | None = Field(default=None, gt=0)
    feas_tol: float | None = Field(default=None, gt=0)
    max_iter: int | None = Field(default=None, ge=1)


class SolveRequest(BaseModel):
    problem: str = Field(description="problem file text")
    overrides: SolveOverrides | None = None


class SolveResponse(BaseModel):
    report: dict


class ValidateRequest(BaseModel):
    problem: str


class ValidateResponse(BaseModel):
    canonical: str
    n: int
    d: int
    mode: str
    models: list[str]


class DesignPayload(BaseModel):
    points: list[list[float]]
    weights: list[float]


class VerifyRequest(BaseModel):
    problem: str
    design: DesignPayload
    grid: int | None = Field(default=None, ge=2)
    seed: int | None = None


class VerifyResponse(BaseModel):
    verdict: str
    criterion_value: float
    max_violation: float
    active_pairs: list[list[int]]
    support_slacks: dict[str, list[float]]
    messages: list[str]
    pairs: list[dict]


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorDetail(BaseModel):
    stage: str
    message: str
