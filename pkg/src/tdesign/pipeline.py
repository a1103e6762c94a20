"""End-to-end orchestration: relaxation hierarchy, design recovery, verification.

The moment machinery recovers the support of the optimal design from noisy
relaxation output; the reported design is then chosen by a small tournament
arbitrated by the equivalence theorem:

  A. the raw extraction design (moment-matched least-squares weights),
  B. the same support with weights re-solved exactly on it,
  C. for two-model min-mode problems, the support read off the peaks of the
     minimax certificate's sensitivity on the verification grid, again with
     exactly re-solved weights.

The first candidate that passes the equivalence check wins; otherwise the
one with the smallest violation is reported (unverified).  All candidates
come from the problem's own optimality structure; atom positions are never
iterated against the criterion.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .discrim import (
    EquivalenceReport,
    basis_matrix,
    design_space_grid,
    minimax_representer,
    verify_equivalence,
)
from .extract import ExtractionError, ExtractionReport, run_extraction
from .moments import DesignMeasure, moments_of_design
from .relax import (
    DiscriminationProblem,
    HierarchyError,
    RelaxationSolution,
    optimize_support_weights,
    run_hierarchy,
)


@dataclass
class RunReport:
    problem: DiscriminationProblem
    solution: RelaxationSolution
    extraction: ExtractionReport | None
    design: DesignMeasure | None
    design_source: str  # refined | lstsq | certificate-peaks | none
    equivalence: EquivalenceReport | None
    criterion_value: float | None
    timings: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return self.equivalence.verdict if self.equivalence is not None else "NONE"

    @property
    def chosen_orders(self) -> tuple[int, int | None]:
        r = self.extraction.state.r if self.extraction is not None else None
        return (self.solution.tau, r)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def certificate_peak_support(
    p: DiscriminationProblem, grid_density: int | None, seed: int, max_atoms: int = 40
) -> list[tuple[float, ...]]:
    """Candidate support from the minimax certificate (two-model problems).

    The optimal design's support lies in the equioscillation set of the
    least-favorable direction; its grid peaks, merged by proximity, are a
    complete candidate list whenever the support sits on the grid.
    """
    if p.K != 2 or p.mode != "minmax":
        raise ValueError("certificate support applies to two-model min-mode problems")
    grid = design_space_grid(p.constraints, p.n, density=grid_density, seed=seed)
    F = basis_matrix(p.basis, grid)
    u, c = minimax_representer(p.models[1].box, p.models[0].box, F)
    vals = np.abs(F @ u)
    near = np.nonzero(vals >= c * (1.0 - 1e-5))[0]
    order = near[np.argsort(-vals[near])]
    step = _grid_step(p, grid)
    chosen: list[np.ndarray] = []
    for idx in order:
        pt = grid[idx]
        if all(np.max(np.abs(pt - q)) > 1.5 * step for q in chosen):
            chosen.append(pt)
        if len(chosen) >= max_atoms:
            break
    if not chosen:
        raise ValueError("certificate sensitivity has no grid peaks")
    return [tuple(float(v) for v in pt) for pt in chosen]


def _grid_step(p: DiscriminationProblem, grid: np.ndarray) -> float:
    col = np.unique(np.round(grid[:, 0], 12))
    return float(np.min(np.diff(col))) if col.size > 1 else 0.1


def _refined(p: DiscriminationProblem, points) -> DesignMeasure:
    w, _ = optimize_support_weights(list(points), p)
    keep = w > 1e-7
    pts = [pt for pt, k in zip(points, keep) if k]
    return DesignMeasure(pts, w[keep] / w[keep].sum())


def run_pipeline(p: DiscriminationProblem, tau_max: int | None = None,
                 r_max: int | None = None) -> RunReport:
    """Hierarchy, extraction, candidate tournament, equivalence check."""
    timings: dict[str, float] = {}
    warnings: list[str] = []
    t0 = time.perf_counter()
    try:
        solution = run_hierarchy(p, tau_max=tau_max)
    except HierarchyError as exc:
        raise PipelineError("relaxation", exc) from exc
    timings["hierarchy"] = time.perf_counter() - t0
    warnings.extend(solution.warnings)

    if p.mode == "minmax" and solution.value <= 1e-9:
        # indistinguishable models: every design is optimal at value 0
        return RunReport(
            problem=p, solution=solution, extraction=None, design=None,
            design_source="none", equivalence=None, criterion_value=0.0,
            timings=timings, warnings=warnings,
        )

    t1 = time.perf_counter()
    extraction: ExtractionReport | None = None
    extraction_error: ExtractionError | None = None
    try:
        extraction = run_extraction(solution.y_star, p, r_start=solution.tau + 1, r_max=r_max)
    except ExtractionError as exc:
        extraction_error = exc
    timings["extraction"] = time.perf_counter() - t1

    candidates: list[tuple[str, DesignMeasure]] = []
    if extraction is not None:
        try:
            candidates.append(("refined", _refined(p, extraction.design.points)))
        except Exception as exc:
            warnings.append(f"support-weight refinement failed: {exc}")
        candidates.append(("lstsq", extraction.design))
    if p.K == 2 and p.mode == "minmax" and p.n <= 4:
        # peak reading needs a dense lattice; sampled grids miss the
        # (measure-zero) equioscillation points entirely
        try:
            support = certificate_peak_support(p, p.options.grid_density, p.options.seed)
            candidates.append(("certificate-peaks", _refined(p, support)))
        except Exception as exc:
            warnings.append(f"certificate-peak support unavailable: {exc}")

    if not candidates:
        raise PipelineError("extraction", extraction_error or RuntimeError("no design candidate"))

    t2 = time.perf_counter()
    best: tuple[str, DesignMeasure, EquivalenceReport] | None = None
    for source, design in candidates:
        try:
            eq = verify_equivalence(
                design, p, moments_of_design(design, 2 * p.d),
                grid_density=p.options.grid_density, seed=p.options.seed,
            )
        except Exception as exc:
            warnings.append(f"verification of {source} candidate failed: {exc}")
            continue
        if best is None or _better(eq, best[2]):
            best = (source, design, eq)
        if eq.verdict == "PASS":
            break
    timings["verification"] = time.perf_counter() - t2
    if best is None:
        raise PipelineError("verification", RuntimeError("no candidate could be verified"))

    source, design, eq = best
    if extraction_error is not None:
        warnings.append(f"moment extraction failed ({extraction_error}); design from {source}")
    return RunReport(
        problem=p,
        solution=solution,
        extraction=extraction,
        design=design.sorted(),
        design_source=source,
        equivalence=eq,
        criterion_value=eq.criterion_value,
        timings=timings,
        warnings=warnings,
    )


def _better(a: EquivalenceReport, b: EquivalenceReport) -> bool:
    rank = {"PASS": 0, "INCONCLUSIVE": 1, "FAIL": 2}
    if rank[a.verdict] != rank[b.verdict]:
        return rank[a.verdict] < rank[b.verdict]
    return a.max_violation < b.max_violation
