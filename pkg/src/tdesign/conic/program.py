"""Standard-form conic program container.

A program maximizes a linear objective over a decision vector x subject to
linear equalities, affine positive-semidefinite blocks S_k(x) = F_k0 +
sum_j x_j F_kj >= 0, and an affine nonnegative-orthant block G x + h >= 0.
The container is immutable once frozen and is consumed by the internal
interior-point solver and by the external-solver text adapter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def svec_index(i: int, j: int) -> int:
    """Position of (i, j), i <= j, in the column-major upper-triangle order."""
    return j * (j + 1) // 2 + i


def svec_length(m: int) -> int:
    return m * (m + 1) // 2


@dataclass
class PsdBlock:
    """Affine symmetric-matrix map in sparse entry form.

    Entry (i, j, var, val) adds val to positions (i, j) and (j, i) of the
    coefficient matrix of variable ``var`` (or of the constant term when
    var is None).
    """

    size: int
    entries: list[tuple[int, int, int | None, float]] = field(default_factory=list)

    def add(self, i: int, j: int, var: int | None, val: float) -> None:
        if not (0 <= i < self.size and 0 <= j < self.size):
            raise ValueError(f"entry ({i},{j}) outside block of size {self.size}")
        if val != 0.0:
            self.entries.append((min(i, j), max(i, j), var, float(val)))

    def constant(self) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        for i, j, var, val in self.entries:
            if var is None:
                out[i, j] += val
                if i != j:
                    out[j, i] += val
        return out

    def coefficient(self, var: int) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        for i, j, v, val in self.entries:
            if v == var:
                out[i, j] += val
                if i != j:
                    out[j, i] += val
        return out

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """S(x) = F0 + sum_j x_j Fj as a dense symmetric matrix."""
        out = np.zeros((self.size, self.size))
        for i, j, var, val in self.entries:
            v = val if var is None else val * x[var]
            out[i, j] += v
            if i != j:
                out[j, i] += v
        return out


class ConicProgram:
    """Maximize objective . x subject to eq_A x = eq_b, PSD blocks, nonneg rows."""

    def __init__(self, nvars: int):
        if nvars < 1:
            raise ValueError("need at least one decision variable")
        self.nvars = nvars
        self.objective = np.zeros(nvars)
        self._eq_rows: list[np.ndarray] = []
        self._eq_rhs: list[float] = []
        self.psd_blocks: list[PsdBlock] = []
        self._nn_rows: list[np.ndarray] = []
        self._nn_const: list[float] = []

    # -- construction -----------------------------------------------------

    def set_objective(self, coeffs: dict[int, float] | np.ndarray) -> None:
        if isinstance(coeffs, dict):
            self.objective = np.zeros(self.nvars)
            for j, v in coeffs.items():
                self._check_var(j)
                self.objective[j] = float(v)
        else:
            arr = np.asarray(coeffs, dtype=float)
            if arr.shape != (self.nvars,):
                raise ValueError("objective length mismatch")
            self.objective = arr.copy()

    def add_equality(self, coeffs: dict[int, float], rhs: float) -> int:
        row = np.zeros(self.nvars)
        for j, v in coeffs.items():
            self._check_var(j)
            row[j] += float(v)
        self._eq_rows.append(row)
        self._eq_rhs.append(float(rhs))
        return len(self._eq_rows) - 1

    def add_psd_block(self, size: int) -> PsdBlock:
        if size < 1:
            raise ValueError("PSD block size must be >= 1")
        block = PsdBlock(size)
        self.psd_blocks.append(block)
        return block

    def add_nonneg(self, coeffs: dict[int, float], const: float = 0.0) -> int:
        """Row: sum_j coeffs[j] x_j + const >= 0."""
        row = np.zeros(self.nvars)
        for j, v in coeffs.items():
            self._check_var(j)
            row[j] += float(v)
        self._nn_rows.append(row)
        self._nn_const.append(float(const))
        return len(self._nn_rows) - 1

    def _check_var(self, j: int) -> None:
        if not 0 <= j < self.nvars:
            raise ValueError(f"variable index {j} out of range [0, {self.nvars})")

    # -- views ------------------------------------------------------------

    @property
    def n_eq(self) -> int:
        return len(self._eq_rows)

    @property
    def n_nonneg(self) -> int:
        return len(self._nn_rows)

    def eq_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._eq_rows:
            return np.zeros((0, self.nvars)), np.zeros(0)
        return np.vstack(self._eq_rows), np.asarray(self._eq_rhs)

    def nonneg_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._nn_rows:
            return np.zeros((0, self.nvars)), np.zeros(0)
        return np.vstack(self._nn_rows), np.asarray(self._nn_const)

    # -- diagnostics -------------------------------------------------------

    def feasibility_violation(self, x: np.ndarray) -> float:
        """Worst constraint violation of a candidate point (for tests/verification)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        A, b = self.eq_matrix()
        if A.size:
            worst = max(worst, float(np.max(np.abs(A @ x - b))))
        G, h = self.nonneg_matrix()
        if G.size:
            worst = max(worst, float(np.max(-(G @ x + h), initial=0.0)))
        for blk in self.psd_blocks:
            evals = np.linalg.eigvalsh(blk.evaluate(x))
            worst = max(worst, float(max(0.0, -evals[0])))
        return worst


@dataclass
class SolverResult:
    status: str  # optimal | infeasible | unbounded | max-iterations | numerical-failure
    x: np.ndarray | None
    objective: float | None
    gap: float
    iterations: int
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    dual_psd: list[np.ndarray] | None = None
    dual_nonneg: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    message: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"

    def usable(self, feas_tol: float = 1e-6, gap_tol: float = 1e-6) -> bool:
        """Optimal, or converged far enough that downstream checks can judge it.

        Interior-point endgames on degenerate (non-strictly-complementary)
        optima can stall one decade short of the certified tolerance; the
        returned point is still accurate to far better than the pipeline's
        needs, so consumers accept it and let their own checks arbitrate.
        External solvers may not report dual residual or gap; unknown
        (non-finite) quality fields do not disqualify a point whose primal
        feasibility has been verified.
        """
        if self.status == "optimal":
            return True
        if self.status != "max-iterations" or self.x is None:
            return False
        if not (np.isfinite(self.primal_residual) and self.primal_residual <= feas_tol):
            return False
        if np.isfinite(self.dual_residual) and self.dual_residual > 10 * feas_tol:
            return False
        if np.isfinite(self.gap) and self.gap > gap_tol * max(1.0, abs(self.objective or 0.0)):
            return False
        return True
