"""Atomic design recovery from an optimal truncated moment vector.

The pipeline per extraction order r: complete the optimal low-degree moments
to degree 2(d+r) by trace minimization of the big moment matrix (the pinned
coordinates are substituted out, so the conic program only carries the new
high-degree moments); certify atomicity through the rank condition
rank M_{d+r} = rank M_{d+r-v}; read the support points off the eigenstructure
of a random convex combination of the multiplication (shift) matrices of the
quotient basis; recover weights by least squares against the pinned moments;
and accept only when the recovered design reproduces the moments it came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .conic import ConicProgram
from .moments import DesignMeasure, MomentVector, build_moment_matrix, moments_of_design
from .polynomials import add_indices, generate_basis
from .relax import DiscriminationProblem, RunOptions, add_moment_structured_block, solve_program

RANK_REL_TOL = 1e-6
ATOM_MERGE_TOL = 1e-6
WEIGHT_RESIDUAL_TOL = 1e-4
ROUND_TRIP_TOL = 1e-5
ATOM_FEASIBILITY_TOL = 1e-6


class ExtractionError(RuntimeError):
    pass


class FlatnessError(ExtractionError):
    """Rank condition not met; caller should increase r."""


class InconsistentExtraction(ExtractionError):
    """Atoms/weights do not reproduce the moments; caller should increase r."""


@dataclass
class ExtractionState:
    r: int
    pin_slack: float = 0.0
    y_r: MomentVector | None = None
    rank_full: int | None = None
    rank_reduced: int | None = None
    flat: bool = False
    design: DesignMeasure | None = None
    residual: float | None = None
    error: str | None = None


@dataclass
class ExtractionReport:
    design: DesignMeasure
    state: ExtractionState
    attempts: list[ExtractionState] = field(default_factory=list)


def build_extraction_program(
    y_star: MomentVector, p: DiscriminationProblem, r: int, pin_slack: float = 0.0
) -> tuple[ConicProgram, int]:
    """Trace-minimization completion of y* to degree 2(d+r).

    minimize trace M_{d+r}(y_r) subject to the moment and localizing blocks
    being PSD and the low-degree coordinates pinned to y*.  With pin_slack 0
    the pinning is exact and done by substitution, so the decision vector
    holds only the moments of degree above 2d; an inconsistent prefix shows
    up as solver infeasibility.  A positive pin_slack turns the pinning into
    |y_r - y*| <= slack per coordinate (with y_0 = 1 kept exact): the
    relaxation solve only delivers the optimal moments to within its own
    accuracy, and a completion pinned hard to noisy data represents no
    measure at all.  Everything lives in the normalized domain coordinates
    of the hierarchy.  Returns (program, number of pinned coordinates).
    """
    n, d = p.n, p.d
    if y_star.arity != n:
        raise ValueError("moment vector arity mismatch")
    if y_star.degree_bound < 2 * d:
        raise ValueError("moment vector shorter than the pinning degree")
    full = generate_basis(n, 2 * (d + r))
    q_pin = len(generate_basis(n, 2 * d))
    if len(full) - q_pin < 1:
        raise ValueError(f"extraction order r={r} adds no completion variables")

    if pin_slack == 0.0:
        nvars = len(full) - q_pin
        prog = ConicProgram(nvars)

        def resolve(gamma):
            idx = full.index_of(gamma)
            if idx < q_pin:
                return ("const", float(y_star.values[idx]))
            return ("var", idx - q_pin)

        def objective_index(idx):
            return idx - q_pin if idx >= q_pin else None

    else:
        nvars = len(full)
        prog = ConicProgram(nvars)
        prog.add_equality({0: 1.0}, 1.0)
        for idx in range(1, q_pin):
            target = float(y_star.values[idx])
            prog.add_nonneg({idx: 1.0}, pin_slack - target)
            prog.add_nonneg({idx: -1.0}, pin_slack + target)

        def resolve(gamma):
            return ("var", full.index_of(gamma))

        def objective_index(idx):
            return idx

    add_moment_structured_block(prog, n, d + r, resolve)
    for g, v in zip(p.scaling.constraints, p.constraint_shifts()):
        add_moment_structured_block(prog, n, max(0, d + r - v), resolve, g)

    # trace of M_{d+r}: diagonal entries are y_{2 alpha}
    objective: dict[int, float] = {}
    for alpha in generate_basis(n, d + r):
        var = objective_index(full.index_of(add_indices(alpha, alpha)))
        if var is not None:
            objective[var] = objective.get(var, 0.0) - 1.0
    prog.set_objective(objective)
    return prog, q_pin


def numerical_rank(a: np.ndarray, rel_tol: float = RANK_REL_TOL) -> int:
    """Count of singular values above rel_tol times the largest."""
    if a.size == 0:
        return 0
    svals = np.linalg.svd(a, compute_uv=False)
    if svals[0] <= 0.0:
        return 0
    return int(np.sum(svals > rel_tol * svals[0]))


def extract_atoms(
    y_r: MomentVector, p: DiscriminationProblem, r: int, seed: int = 1729,
    rank_tol: float = RANK_REL_TOL,
) -> list[tuple[float, ...]]:
    """Support points of an atomic measure certified flat at order r.

    Factor M_{d+r}(y_r) = V'V by eigendecomposition at the numerical rank;
    column-echelon reduction of V (graded column order keeps the pivot
    monomials at low degree, where flatness guarantees they span) yields a
    monomial basis of the quotient and its multiplication matrices N_i; the
    ordered Schur vectors of a seeded random convex combination of the N_i
    read out the atom coordinates as Rayleigh quotients.
    """
    n, d = p.n, p.d
    M = build_moment_matrix(y_r, d + r)
    evals, evecs = np.linalg.eigh(M)
    if evals[-1] <= 0.0:
        raise ExtractionError("moment matrix has no positive mass")
    keep = evals > rank_tol * evals[-1]
    rank = int(np.sum(keep))
    V = (np.sqrt(evals[keep])[:, None] * evecs[:, keep].T)  # rank x m, M = V'V

    pivots, G = _column_echelon(V, rank)
    basis_rows = generate_basis(n, d + r)
    pivot_monos = [basis_rows[c] for c in pivots]
    mult = []
    for i in range(n):
        Ni = np.empty((rank, rank))
        for s, beta in enumerate(pivot_monos):
            shifted = add_indices(beta, tuple(1 if t == i else 0 for t in range(n)))
            if shifted not in basis_rows:
                raise FlatnessError(
                    f"pivot monomial {beta} shifted by x{i + 1} leaves the basis; extraction not flat enough"
                )
            Ni[:, s] = G[:, basis_rows.index_of(shifted)]
        mult.append(Ni)

    rng = np.random.default_rng(seed)
    for attempt in range(5):
        c = rng.dirichlet(np.ones(n))
        N = sum(ci * Ni for ci, Ni in zip(c, mult))
        T, Q = scipy.linalg.schur(N, output="real")
        sub = np.diag(T, -1) if rank > 1 else np.zeros(0)
        if sub.size and np.max(np.abs(sub)) > 1e-7 * max(1.0, float(np.max(np.abs(T)))):
            continue  # complex eigenvalue pair: reseed the combination
        points = []
        for k in range(rank):
            q = Q[:, k]
            points.append(tuple(float(q @ Ni @ q) for Ni in mult))
        return _dedup(points)
    raise ExtractionError("defective eigenstructure after 5 reseeded shift combinations")


def _column_echelon(V: np.ndarray, rank: int) -> tuple[list[int], np.ndarray]:
    """Gauss-Jordan on columns in basis order; returns pivot columns and the
    reduced matrix G with G[:, pivots] = I, so G[:, c] expresses column c in
    the pivot-column basis."""
    W = V.copy()
    m = W.shape[1]
    pivots: list[int] = []
    tol = 1e-9 * max(1.0, float(np.max(np.abs(W))))
    row = 0
    for col in range(m):
        if row >= rank:
            break
        pivot_row = row + int(np.argmax(np.abs(W[row:, col])))
        if abs(W[pivot_row, col]) <= tol:
            continue
        W[[row, pivot_row]] = W[[pivot_row, row]]
        W[row] = W[row] / W[row, col]
        for rr in range(W.shape[0]):
            if rr != row and W[rr, col] != 0.0:
                W[rr] -= W[rr, col] * W[row]
        pivots.append(col)
        row += 1
    if len(pivots) < rank:
        raise FlatnessError(f"echelon found {len(pivots)} pivots for rank {rank}")
    return pivots, W[:rank]


def _dedup(points: list[tuple[float, ...]]) -> list[tuple[float, ...]]:
    out: list[tuple[float, ...]] = []
    for pt in points:
        if not any(max(abs(a - b) for a, b in zip(pt, q)) <= ATOM_MERGE_TOL for q in out):
            out.append(pt)
    return out


def recover_weights(
    points: list[tuple[float, ...]], y_star: MomentVector, d: int,
    residual_tol: float = WEIGHT_RESIDUAL_TOL,
) -> tuple[DesignMeasure, float]:
    """Weights from the moment-matching least squares over all |alpha| <= 2d.

    The system is overdetermined on purpose (noise averaging from the conic
    solve); negatives within 1e-6 are clipped and the weights renormalized.
    """
    if not points:
        raise InconsistentExtraction("no support points to weight")
    basis = generate_basis(y_star.arity, 2 * d)
    q = len(basis)
    if len(points) > q:
        raise InconsistentExtraction(
            f"{len(points)} atoms but only {q} moments up to degree {2 * d}; weights are not identifiable"
        )
    A = np.empty((q, len(points)))
    for col, pt in enumerate(points):
        for rowi, alpha in enumerate(basis):
            v = 1.0
            for xi, e in zip(pt, alpha):
                if e:
                    v *= xi**e
            A[rowi, col] = v
    target = y_star.values[:q]
    w, *_ = np.linalg.lstsq(A, target, rcond=None)
    residual = float(np.max(np.abs(A @ w - target)))
    if np.any(w < -1e-6):
        raise InconsistentExtraction(f"negative weight {float(w.min()):.2e} in recovery")
    if residual > residual_tol:
        raise InconsistentExtraction(f"weight-recovery residual {residual:.2e} exceeds {residual_tol}")
    w = np.clip(w, 0.0, None)
    total = float(w.sum())
    if total <= 0:
        raise InconsistentExtraction("all weights vanished")
    w = w / total
    keep = w > 1e-12
    design = DesignMeasure([p for p, k in zip(points, keep) if k], w[keep])
    return design, residual


PIN_SLACK_SCHEDULE = (0.0, 1e-4, 3e-3, 1e-2)


def run_extraction(
    y_star: MomentVector,
    p: DiscriminationProblem,
    r_start: int,
    r_max: int | None = None,
    options: RunOptions | None = None,
) -> ExtractionReport:
    """Completion / flatness / atom / weight loop over increasing r.

    Each order first tries the exact pinning, then re-tries with growing
    pinning slack: the optimal moments from the relaxation carry solver
    noise, and a completion pinned hard to them may represent no measure.
    Consistency tolerances downstream widen with the slack actually used;
    the equivalence check on the final design remains the true arbiter.
    """
    opts = options or p.options
    if opts.extraction_solver is not None and opts.extraction_solver != opts.solver:
        # completion programs can need a different solver than the relaxations
        # (dense PSD blocks of this size overwhelm some external solvers)
        from dataclasses import replace

        opts = replace(opts, solver=opts.extraction_solver)
    r_cap = opts.r_max if r_max is None else r_max
    v = max(p.constraint_shifts(), default=1)
    attempts: list[ExtractionState] = []
    for r in range(r_start, r_cap + 1):
        for slack in PIN_SLACK_SCHEDULE:
            state = ExtractionState(r=r, pin_slack=slack)
            attempts.append(state)
            try:
                prog, q_pin = build_extraction_program(y_star, p, r, pin_slack=slack)
                res = solve_program(prog, opts)
                if res.status == "infeasible":
                    if slack == PIN_SLACK_SCHEDULE[-1]:
                        raise ExtractionError(
                            "completion program infeasible: the pinned moments are not a valid prefix"
                        )
                    state.error = "completion infeasible at this pinning slack"
                    continue
                if not res.usable(feas_tol=1e-6, gap_tol=1e-5):
                    state.error = f"completion solve: {res.status} ({res.message})"
                    continue
                if slack == 0.0:
                    vals = np.concatenate([y_star.values[:q_pin], res.x])
                else:
                    vals = res.x.copy()
                y_r = MomentVector(p.n, 2 * (p.d + r), vals)
                state.y_r = y_r
                # rank decisions cannot be finer than the noise the pinning admits
                rank_tol = max(RANK_REL_TOL, 3.0 * slack)
                M_full = build_moment_matrix(y_r, p.d + r)
                M_red = build_moment_matrix(y_r, max(0, p.d + r - v))
                state.rank_full = numerical_rank(M_full, rank_tol)
                state.rank_reduced = numerical_rank(M_red, rank_tol)
                state.flat = state.rank_full == state.rank_reduced
                if not state.flat:
                    state.error = f"rank {state.rank_full} != reduced rank {state.rank_reduced}"
                    continue
                points_u = extract_atoms(y_r, p, r, seed=opts.seed, rank_tol=rank_tol)
                # boundary repair: coordinates within the noise cap of the
                # normalized box boundary are boundary coordinates blurred by
                # the pinning slack; snap them onto it.  Anything further out
                # stays put for the feasibility check to reject.
                cap = 2.0 * slack + 1e-5
                repaired = []
                for pt in points_u:
                    q = np.asarray(pt, dtype=float)
                    near_hi = np.abs(q - 1.0) <= cap
                    near_lo = np.abs(q + 1.0) <= cap
                    q[near_hi] = 1.0
                    q[near_lo] = -1.0
                    repaired.append(tuple(q))
                points_u = _dedup(repaired)
                design_u, residual = recover_weights(
                    points_u, y_star, p.d, residual_tol=max(WEIGHT_RESIDUAL_TOL, 3.0 * slack)
                )
                state.residual = residual
                rt = float(
                    np.max(np.abs(moments_of_design(design_u, 2 * p.d).values - y_star.values[:q_pin]))
                )
                if rt > max(ROUND_TRIP_TOL, 3.0 * slack):
                    state.error = f"moment round-trip error {rt:.2e} exceeds {max(ROUND_TRIP_TOL, 3.0 * slack)}"
                    continue
                # feasibility in normalized coordinates, where constraints are O(1)
                feas = design_u.max_constraint_violation(p.scaling.constraints)
                if feas > ATOM_FEASIBILITY_TOL:
                    state.error = f"extracted atom violates design space by {feas:.2e}"
                    continue
                # back to original coordinates for the reported design
                design = DesignMeasure(p.scaling.to_design_space(design_u.points), design_u.weights)
                state.design = design
                return ExtractionReport(design=design, state=state, attempts=attempts)
            except (FlatnessError, InconsistentExtraction) as exc:
                state.error = str(exc)
                continue
    details = "; ".join(f"r={s.r} slack={s.pin_slack:g}: {s.error}" for s in attempts if s.error)
    raise ExtractionError(f"extraction failed for r in [{r_start}, {r_cap}]: {details}")
