"""Assembly of the relaxed semidefinite program and the relaxation-order loop.

At relaxation order tau the decision vector holds a truncated moment vector y
of degree 2(d + tau) plus, per model pair, the dual variables (z, t) of the
pair criterion and the epigraph variables of the box support functions.  The
constraints are, per pair, the Schur-complement block

    [ M_d(y)  z ]
    [ z'     4t ]  >= 0,

the moment matrix M_{d+tau}(y) >= 0, one localizing matrix per design-space
constraint, and y_0 = 1.  The min-mode objective maximizes an epigraph scalar
below every pair expression -t - delta*_j(z) - delta*_k(-z); weighted mode
maximizes the weighted sum directly.  Increasing tau shrinks the feasible set
(outer approximations of the moment cone are nested), so the optimal value is
nonincreasing in tau and the loop stops when it stalls.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProgram, SolverOptions, SolverResult, solve, solve_external
from .discrim import (
    ModelSpec,
    add_support_linearization,
    bounding_box,
    count_support_vars,
    design_space_grid,
    difference_box,
)
from .domain import DomainScaling
from .moments import MomentVector
from .polynomials import Polynomial, add_indices, generate_basis


@dataclass
class RunOptions:
    tau_max: int = 3
    r_max: int = 4
    stall_tol: float = 1e-6
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    refine: int = 1
    grid_density: int | None = None
    seed: int = 1729
    solver: str = "internal"  # "internal" or "external:<command>"
    extraction_solver: str | None = None  # defaults to `solver`

    def conic_options(self) -> SolverOptions:
        return SolverOptions(gap_tol=self.gap_tol, feas_tol=self.feas_tol,
                             max_iter=self.max_iter, refine=self.refine)


def solve_program(prog: ConicProgram, options: RunOptions) -> SolverResult:
    if options.solver == "internal":
        return solve(prog, options.conic_options())
    if options.solver.startswith("external:"):
        from .conic.external import ExternalSolverError

        command = options.solver.split(":", 1)[1]
        try:
            return solve_external(prog, command)
        except ExternalSolverError as exc:
            return SolverResult(
                status="numerical-failure", x=None, objective=None, gap=float("nan"),
                iterations=0, message=str(exc),
            )
    raise ValueError(f"unknown solver spec {options.solver!r}")


class DiscriminationProblem:
    """The full design problem: factors, basis degree, design space, models."""

    def __init__(
        self,
        n: int,
        d: int,
        constraints: list[Polynomial],
        models: list[ModelSpec],
        mode: str = "minmax",
        weights: dict[tuple[int, int], float] | None = None,
        options: RunOptions | None = None,
    ):
        if len(models) < 2:
            raise ValueError("need at least two models to discriminate")
        if mode not in ("minmax", "weighted"):
            raise ValueError(f"unknown mode {mode!r}")
        self.n = n
        self.d = d
        self.basis = generate_basis(n, d)
        l = len(self.basis)
        for m in models:
            if len(m.box) != l:
                raise ValueError(f"model {m.label!r} box length {len(m.box)} != basis length {l}")
        labels = [m.label for m in models]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate model labels")
        for g in constraints:
            if g.arity != n:
                raise ValueError("constraint arity mismatch")
            if g.is_constant():
                raise ValueError("constant design-space constraint")
        self.constraints = list(constraints)
        self.models = list(models)
        self.mode = mode
        self.weights = dict(weights or {})
        if mode == "weighted":
            for (j, k), w in self.weights.items():
                if not (1 <= k < j <= len(models)):
                    raise ValueError(f"weight refers to invalid pair ({j},{k})")
                if w < 0:
                    raise ValueError("pair weights must be nonnegative")
            if not any(w > 0 for w in self.weights.values()):
                raise ValueError("weighted mode needs at least one positive pair weight")
        self.options = options or RunOptions()
        if self.constraints:
            # nonemptiness of {g_i >= 0}: locate one feasible point on a coarse lattice
            design_space_grid(self.constraints, n, density=5)
        # all hierarchy numerics run on a domain normalized onto [-1,1]^n;
        # models and reported designs stay in original coordinates
        self.scaling = DomainScaling.from_bounds(bounding_box(self.constraints, n), self.constraints)

    @property
    def K(self) -> int:
        return len(self.models)

    def pairs(self) -> list[tuple[int, int]]:
        """All (j, k) with j > k, 1-based, lexicographic."""
        return [(j, k) for j in range(2, self.K + 1) for k in range(1, j)]

    def pair_weights(self) -> dict[tuple[int, int], float]:
        return {pk: float(self.weights.get(pk, 0.0)) for pk in self.pairs()}

    def degenerate_pairs(self) -> list[tuple[int, int]]:
        out = []
        for j, k in self.pairs():
            diff = difference_box(self.models[j - 1].box, self.models[k - 1].box)
            if np.all(diff.lower <= 0.0) and np.all(diff.upper >= 0.0):
                out.append((j, k))
        return out

    def constraint_shifts(self) -> list[int]:
        """v_i = ceil(deg(g_i)/2) per constraint."""
        return [(g.degree + 1) // 2 for g in self.constraints]


@dataclass
class RelaxationLayout:
    """Decoder for the relaxation decision vector."""

    tau: int
    ny: int
    l: int
    pair_order: list[tuple[int, int]]
    z_offset: dict[tuple[int, int], int]
    t_index: dict[tuple[int, int], int]
    s_index: int | None
    pair_expr: dict[tuple[int, int], dict[int, float]]  # linear form of -t - support terms
    nvars: int
    block_sizes: list[int]
    warnings: list[str] = field(default_factory=list)

    def moment_vector(self, n: int, d: int, x: np.ndarray) -> MomentVector:
        return MomentVector(n, 2 * (d + self.tau), x[: self.ny])

    def pair_value(self, pair: tuple[int, int], x: np.ndarray) -> float:
        return float(sum(c * x[v] for v, c in self.pair_expr[pair].items()))


def add_moment_structured_block(
    prog: ConicProgram,
    n: int,
    s: int,
    resolve,
    g: Polynomial | None = None,
) -> int:
    """PSD block with entries sum_gamma g_gamma y_{gamma+alpha+beta}.

    ``resolve(gamma)`` maps a multi-index to ("const", value) or
    ("var", index); g = None means the plain moment matrix.  Returns the
    block size.
    """
    rows = generate_basis(n, s)
    blk = prog.add_psd_block(len(rows))
    gterms = list(g.terms.items()) if g is not None else [((0,) * n, 1.0)]
    for a in range(len(rows)):
        for b in range(a, len(rows)):
            ab = add_indices(rows[a], rows[b])
            for gamma, c in gterms:
                kind, val = resolve(add_indices(ab, gamma))
                if kind == "const":
                    if c * val != 0.0:
                        blk.add(a, b, None, c * val)
                else:
                    blk.add(a, b, val, c)
    return len(rows)


def build_relaxation(p: DiscriminationProblem, tau: int) -> tuple[ConicProgram, RelaxationLayout]:
    """The order-tau relaxation as a standard-form conic program."""
    if tau < 0:
        raise ValueError("relaxation order must be >= 0")
    n, d = p.n, p.d
    l = len(p.basis)
    full = generate_basis(n, 2 * (d + tau))
    ny = len(full)
    pairs = p.pairs()
    minmax = p.mode == "minmax"

    nvars = ny
    z_offset: dict[tuple[int, int], int] = {}
    t_index: dict[tuple[int, int], int] = {}
    support_base: dict[tuple[int, int], int] = {}
    for pk in pairs:
        z_offset[pk] = nvars
        nvars += l
        t_index[pk] = nvars
        nvars += 1
        support_base[pk] = nvars
        bj = p.models[pk[0] - 1].box
        bk = p.models[pk[1] - 1].box
        nvars += count_support_vars(bj) + count_support_vars(bk)
    s_index = nvars if minmax else None
    if minmax:
        nvars += 1

    prog = ConicProgram(nvars)
    prog.add_equality({0: 1.0}, 1.0)  # y_0 = 1 (index 0 is the constant monomial)

    def resolve(gamma):
        return ("var", full.index_of(gamma))

    # moment-matrix entries of the ORIGINAL basis in normalized coordinates:
    # M_x = B M_u B', so entry (a, b) = sum_{p,q} B[a,p] B[b,q] y_{alpha_p+alpha_q}
    B = p.scaling.basis_transform(d)
    idx_map = np.array(
        [[full.index_of(add_indices(p.basis[r], p.basis[s])) for s in range(l)] for r in range(l)]
    )

    block_sizes: list[int] = []
    warnings: list[str] = []
    pair_expr: dict[tuple[int, int], dict[int, float]] = {}
    for pk in pairs:
        blk = prog.add_psd_block(l + 1)
        block_sizes.append(l + 1)
        for a in range(l):
            for b in range(a, l):
                if p.scaling.identity:
                    blk.add(a, b, int(idx_map[a, b]), 1.0)
                else:
                    coefs = np.zeros(ny)
                    np.add.at(coefs, idx_map.ravel(), np.outer(B[a], B[b]).ravel())
                    for yi in np.nonzero(coefs)[0]:
                        blk.add(a, b, int(yi), float(coefs[yi]))
        for a in range(l):
            blk.add(a, l, z_offset[pk] + a, 1.0)
        blk.add(l, l, t_index[pk], 4.0)

    block_sizes.append(
        add_moment_structured_block(prog, n, d + tau, resolve)
    )
    for g, v in zip(p.scaling.constraints, p.constraint_shifts()):
        block_sizes.append(
            add_moment_structured_block(prog, n, max(0, d + tau - v), resolve, g)
        )

    objective: dict[int, float] = {}
    wts = p.pair_weights() if not minmax else {}
    for pk in pairs:
        j, k = pk
        bj = p.models[j - 1].box
        bk = p.models[k - 1].box
        z_idx = list(range(z_offset[pk], z_offset[pk] + l))
        expr: dict[int, float] = {t_index[pk]: -1.0}
        contrib, nxt = add_support_linearization(prog, z_idx, bj, negate=False, next_var=support_base[pk])
        for vidx, cv in contrib.items():
            expr[vidx] = expr.get(vidx, 0.0) + cv
        contrib, nxt = add_support_linearization(prog, z_idx, bk, negate=True, next_var=nxt)
        for vidx, cv in contrib.items():
            expr[vidx] = expr.get(vidx, 0.0) + cv
        pair_expr[pk] = expr
        if minmax:
            row = dict(expr)
            row[s_index] = row.get(s_index, 0.0) - 1.0
            prog.add_nonneg(row)
        else:
            w = wts[pk]
            for vidx, cv in expr.items():
                objective[vidx] = objective.get(vidx, 0.0) + w * cv

    for j, k in p.degenerate_pairs():
        warnings.append(
            f"models {p.models[j - 1].label!r} and {p.models[k - 1].label!r} are indistinguishable: "
            "their parameter boxes overlap, so the pair criterion is identically zero"
        )

    if minmax:
        objective = {s_index: 1.0}
    prog.set_objective(objective)
    layout = RelaxationLayout(
        tau=tau,
        ny=ny,
        l=l,
        pair_order=pairs,
        z_offset=z_offset,
        t_index=t_index,
        s_index=s_index,
        pair_expr=pair_expr,
        nvars=nvars,
        block_sizes=block_sizes,
        warnings=warnings,
    )
    return prog, layout


def optimize_support_weights(
    points: list[tuple[float, ...]], p: DiscriminationProblem
) -> tuple[np.ndarray, float]:
    """Exact optimal weights for a design restricted to the given support.

    The criterion restricted to atomic measures on fixed points is the same
    conic program with the moment cone replaced by the simplex of weights
    (M(w) = sum_i w_i f(x_i) f(x_i)'), so no moment or localizing blocks are
    needed.  Used to polish extraction weights before the equivalence check;
    atom positions are never moved.
    """
    from .discrim import basis_column

    l = len(p.basis)
    pairs = p.pairs()
    m = len(points)
    if m < 1:
        raise ValueError("empty support")
    F = [np.outer(f, f) for f in (basis_column(p.basis, np.asarray(pt)) for pt in points)]
    nvars = m
    z_off: dict[tuple[int, int], int] = {}
    t_idx: dict[tuple[int, int], int] = {}
    sup_base: dict[tuple[int, int], int] = {}
    for pk in pairs:
        z_off[pk] = nvars
        nvars += l
        t_idx[pk] = nvars
        nvars += 1
        sup_base[pk] = nvars
        nvars += count_support_vars(p.models[pk[0] - 1].box) + count_support_vars(p.models[pk[1] - 1].box)
    minmax = p.mode == "minmax"
    s_idx = nvars if minmax else None
    if minmax:
        nvars += 1
    prog = ConicProgram(nvars)
    prog.add_equality({i: 1.0 for i in range(m)}, 1.0)
    for i in range(m):
        prog.add_nonneg({i: 1.0})
    objective: dict[int, float] = {}
    wts = p.pair_weights() if not minmax else {}
    for pk in pairs:
        blk = prog.add_psd_block(l + 1)
        for a in range(l):
            for b in range(a, l):
                for i in range(m):
                    if F[i][a, b] != 0.0:
                        blk.add(a, b, i, F[i][a, b])
        for a in range(l):
            blk.add(a, l, z_off[pk] + a, 1.0)
        blk.add(l, l, t_idx[pk], 4.0)
        expr: dict[int, float] = {t_idx[pk]: -1.0}
        contrib, nxt = add_support_linearization(prog, list(range(z_off[pk], z_off[pk] + l)),
                                                 p.models[pk[0] - 1].box, negate=False, next_var=sup_base[pk])
        for vidx, cv in contrib.items():
            expr[vidx] = expr.get(vidx, 0.0) + cv
        contrib, nxt = add_support_linearization(prog, list(range(z_off[pk], z_off[pk] + l)),
                                                 p.models[pk[1] - 1].box, negate=True, next_var=nxt)
        for vidx, cv in contrib.items():
            expr[vidx] = expr.get(vidx, 0.0) + cv
        if minmax:
            row = dict(expr)
            row[s_idx] = row.get(s_idx, 0.0) - 1.0
            prog.add_nonneg(row)
        else:
            for vidx, cv in expr.items():
                objective[vidx] = objective.get(vidx, 0.0) + wts[pk] * cv
    if minmax:
        objective = {s_idx: 1.0}
    prog.set_objective(objective)
    res = solve_program(prog, p.options)
    if not res.usable():
        raise RuntimeError(f"support-weight refinement failed: {res.status} ({res.message})")
    w = np.clip(res.x[:m], 0.0, None)
    total = float(w.sum())
    if total <= 0:
        raise RuntimeError("support-weight refinement produced an empty design")
    return w / total, float(res.objective)


@dataclass
class HierarchyStep:
    tau: int
    objective: float
    status: str
    iterations: int
    seconds: float
    block_sizes: list[int]

    def log_line(self) -> str:
        return f"tau={self.tau} obj={self.objective:.10g} iters={self.iterations} status={self.status}"


@dataclass
class RelaxationSolution:
    tau: int  # smallest order whose value the next order confirmed
    tau_solved: int  # order of the solve y_star came from
    y_star: MomentVector
    pair_t: dict[tuple[int, int], float]
    pair_z: dict[tuple[int, int], np.ndarray]
    pair_values: dict[tuple[int, int], float]
    value: float
    converged: bool
    trace: list[HierarchyStep]
    warnings: list[str]


class HierarchyError(RuntimeError):
    def __init__(self, tau: int, result: SolverResult):
        super().__init__(f"relaxation solve failed at tau={tau}: {result.status} ({result.message})")
        self.tau = tau
        self.result = result


def run_hierarchy(p: DiscriminationProblem, tau_max: int | None = None,
                  stall_tol: float | None = None) -> RelaxationSolution:
    """Solve orders tau = 0, 1, ... until the optimal value stalls.

    The reported tau is the smallest order whose value the next order
    reproduced within stall_tol (relative); the moment vector handed to
    extraction comes from the solve at that chosen order (in normalized
    domain coordinates).  Solver failures abort with the failing order
    attached.
    """
    opts = p.options
    tau_cap = opts.tau_max if tau_max is None else tau_max
    tol = opts.stall_tol if stall_tol is None else stall_tol
    trace: list[HierarchyStep] = []
    solves: list[tuple[SolverResult, RelaxationLayout]] = []
    chosen: int | None = None
    for tau in range(tau_cap + 1):
        prog, layout = build_relaxation(p, tau)
        t0 = time.perf_counter()
        res = solve_program(prog, opts)
        dt = time.perf_counter() - t0
        # wide design domains and many-factor problems stall the endgame a
        # decade or so early; the stall test and the equivalence certificate
        # arbitrate, so accept near-converged solves
        if not res.usable(feas_tol=1e-5, gap_tol=1e-5):
            raise HierarchyError(tau, res)
        trace.append(HierarchyStep(tau, float(res.objective), res.status, res.iterations, dt, layout.block_sizes))
        solves.append((res, layout))
        if tau >= 1 and abs(res.objective - trace[-2].objective) <= tol * max(1.0, abs(res.objective)):
            chosen = tau - 1
            break
    converged = chosen is not None
    if chosen is None:
        chosen = len(solves) - 1
    res, layout = solves[chosen]
    x = res.x
    t_star = float(res.objective)
    y_star = layout.moment_vector(p.n, p.d, x)
    pair_t = {pk: float(x[layout.t_index[pk]]) for pk in layout.pair_order}
    pair_z = {
        pk: x[layout.z_offset[pk] : layout.z_offset[pk] + layout.l].copy() for pk in layout.pair_order
    }
    pair_values = {pk: layout.pair_value(pk, x) for pk in layout.pair_order}
    return RelaxationSolution(
        tau=chosen,
        tau_solved=chosen,
        y_star=y_star,
        pair_t=pair_t,
        pair_z=pair_z,
        pair_values=pair_values,
        value=t_star,
        converged=converged,
        trace=trace,
        warnings=layout.warnings,
    )
