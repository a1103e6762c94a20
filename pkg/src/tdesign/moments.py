"""Truncated moment vectors and the structured matrices built from them.

A truncated moment vector y of degree bound D collects y_alpha = integral of
x^alpha against a measure, for every |alpha| <= D, stored densely in the
graded-lex basis order.  The moment matrix of block degree s has entries
y_{alpha+beta} over row/column monomials of degree <= s (a generalized Hankel
matrix); a localizing matrix twists those entries by a constraint polynomial
g, entry (alpha, beta) = sum_gamma g_gamma * y_{gamma+alpha+beta}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polynomials import MonomialBasis, Polynomial, add_indices, generate_basis

PSD_TOL = 1e-8  # structural PSD checks: min eigenvalue >= -PSD_TOL


class DegreeBoundError(ValueError):
    """Moment vector too short for the requested block."""


@dataclass(frozen=True)
class MomentVector:
    """Moments y_alpha for |alpha| <= degree_bound, in graded-lex order."""

    arity: int
    degree_bound: int
    values: np.ndarray

    def __post_init__(self):
        basis = generate_basis(self.arity, self.degree_bound)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(basis),):
            raise ValueError(f"expected {len(basis)} moments for n={self.arity}, D={self.degree_bound}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite moment entries")
        object.__setattr__(self, "values", vals)
        vals.setflags(write=False)

    @property
    def basis(self) -> MonomialBasis:
        return generate_basis(self.arity, self.degree_bound)

    def __getitem__(self, alpha) -> float:
        return float(self.values[self.basis.index_of(tuple(alpha))])

    @property
    def mass(self) -> float:
        """The zero-order moment y_0 (1 for a normalized design)."""
        return float(self.values[0])

    def truncated(self, new_bound: int) -> "MomentVector":
        """Restriction to |alpha| <= new_bound (a prefix in graded order)."""
        if new_bound > self.degree_bound:
            raise DegreeBoundError(f"cannot extend degree bound {self.degree_bound} to {new_bound}")
        size = len(generate_basis(self.arity, new_bound))
        return MomentVector(self.arity, new_bound, self.values[:size])


def build_moment_matrix(y: MomentVector, s: int) -> np.ndarray:
    """Moment matrix M_s(y): entry (alpha, beta) = y_{alpha+beta}.

    Requires the degree bound of y to cover 2s.  Symmetric by construction.
    """
    if y.degree_bound < 2 * s:
        raise DegreeBoundError(f"moment matrix of block degree {s} needs degree bound >= {2 * s}, have {y.degree_bound}")
    rows = generate_basis(y.arity, s)
    full = y.basis
    m = len(rows)
    out = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            v = y.values[full.index_of(add_indices(rows[i], rows[j]))]
            out[i, j] = v
            out[j, i] = v
    return out


def build_localizing_matrix(g: Polynomial, y: MomentVector, s: int) -> np.ndarray:
    """Localizing matrix M_s(g y): entry (alpha, beta) = sum_gamma g_gamma y_{gamma+alpha+beta}."""
    if g.arity != y.arity:
        raise ValueError(f"constraint arity {g.arity} != moment arity {y.arity}")
    if y.degree_bound < 2 * s + g.degree:
        raise DegreeBoundError(
            f"localizing matrix of block degree {s} for deg-{g.degree} constraint needs degree bound >= {2 * s + g.degree}"
        )
    rows = generate_basis(y.arity, s)
    full = y.basis
    m = len(rows)
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            ab = add_indices(rows[i], rows[j])
            v = 0.0
            for gamma, c in g.terms.items():
                v += c * y.values[full.index_of(add_indices(gamma, ab))]
            out[i, j] = v
            out[j, i] = v
    return out


@dataclass(frozen=True)
class DesignMeasure:
    """Finitely supported probability measure: support points and weights.

    Construction merges points closer than ``merge_tol`` in the max norm
    (weights added), drops points with zero weight, and normalizes weight
    drift beyond 1e-9 as an error rather than silently rescaling.
    """

    points: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...]

    def __init__(self, points, weights, merge_tol: float = 1e-6):
        pts = [tuple(float(c) for c in p) for p in points]
        wts = [float(w) for w in weights]
        if len(pts) != len(wts):
            raise ValueError("points and weights length mismatch")
        if not pts:
            raise ValueError("empty design")
        arity = len(pts[0])
        if any(len(p) != arity for p in pts):
            raise ValueError("inconsistent point arity")
        if any(w < -1e-9 for w in wts):
            raise ValueError(f"negative weight in design: {min(wts)}")
        merged_pts: list[tuple[float, ...]] = []
        merged_wts: list[float] = []
        for p, w in zip(pts, wts):
            for k, q in enumerate(merged_pts):
                if max(abs(a - b) for a, b in zip(p, q)) <= merge_tol:
                    merged_wts[k] += w
                    break
            else:
                merged_pts.append(p)
                merged_wts.append(max(w, 0.0))
        total = sum(merged_wts)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"design weights sum to {total}, expected 1")
        object.__setattr__(self, "points", tuple(merged_pts))
        object.__setattr__(self, "weights", tuple(merged_wts))

    @property
    def arity(self) -> int:
        return len(self.points[0])

    def __len__(self) -> int:
        return len(self.points)

    def max_constraint_violation(self, constraints) -> float:
        """Largest amount by which any point violates any g_i(x) >= 0."""
        worst = 0.0
        for g in constraints:
            for p in self.points:
                worst = max(worst, -g.evaluate(p))
        return worst

    def sorted(self) -> "DesignMeasure":
        """Canonical ordering of atoms (lexicographic by coordinates)."""
        order = sorted(range(len(self.points)), key=lambda i: self.points[i])
        return DesignMeasure([self.points[i] for i in order], [self.weights[i] for i in order])


def moments_of_design(xi: DesignMeasure, D: int) -> MomentVector:
    """Exact moments y_alpha = sum_i p_i x_i^alpha for |alpha| <= D."""
    basis = generate_basis(xi.arity, D)
    pts = np.asarray(xi.points, dtype=float)
    wts = np.asarray(xi.weights, dtype=float)
    vals = np.empty(len(basis))
    for k, alpha in enumerate(basis):
        mono = np.ones(len(pts))
        for i, e in enumerate(alpha):
            if e:
                mono *= pts[:, i] ** e
        vals[k] = float(wts @ mono)
    return MomentVector(xi.arity, D, vals)


def design_moment_matrix(xi: DesignMeasure, d: int) -> np.ndarray:
    """M(xi) = sum_i p_i f(x_i) f(x_i)^T over the degree-d basis."""
    return build_moment_matrix(moments_of_design(xi, 2 * d), d)


def univariate_hankel_blocks(y: MomentVector, d: int) -> tuple[np.ndarray, np.ndarray]:
    """The exact [0,1] moment conditions for a univariate vector (1, c_1, ..., c_2d).

    Returns (H, B) where H[i,j] = c_{i+j} for 0 <= i,j <= d and
    B[i,j] = c_{i+j+1} - c_{i+j+2} for 0 <= i,j <= d-1.  Both are positive
    semidefinite exactly when y is a valid moment vector of a measure on
    [0,1] (boundary cases aside).
    """
    if y.arity != 1:
        raise ValueError("Hankel conditions apply to univariate moment vectors only")
    if y.degree_bound < 2 * d:
        raise DegreeBoundError(f"need moments up to degree {2 * d}")
    c = y.values
    H = np.array([[c[i + j] for j in range(d + 1)] for i in range(d + 1)])
    B = np.array([[c[i + j + 1] - c[i + j + 2] for j in range(d)] for i in range(d)])
    return H, B


def remap_univariate_to_unit(y: MomentVector, lo: float, hi: float) -> MomentVector:
    """Moments of the pushforward under t = (x - lo)/(hi - lo), mapping [lo, hi] onto [0, 1].

    E[t^k] expands binomially in the original moments.
    """
    if y.arity != 1:
        raise ValueError("univariate only")
    if not hi > lo:
        raise ValueError("need hi > lo")
    from math import comb

    w = hi - lo
    c = y.values
    out = np.empty_like(c)
    for k in range(len(c)):
        acc = 0.0
        for j in range(k + 1):
            acc += comb(k, j) * ((-lo) ** (k - j)) * c[j]
        out[k] = acc / w**k
    return MomentVector(1, y.degree_bound, out)


def min_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(a)[0]) if a.size else 0.0


def is_psd(a: np.ndarray, tol: float = PSD_TOL) -> bool:
    return min_eigenvalue(a) >= -tol


def moment_matrix_to_csv(y: MomentVector, s: int) -> str:
    """Debug serialization of M_s(y): header row/column of basis monomials."""
    from .polynomials import format_monomial

    rows = generate_basis(y.arity, s)
    m = build_moment_matrix(y, s)
    lines = ["," + ",".join(format_monomial(a) for a in rows)]
    for i, alpha in enumerate(rows):
        lines.append(format_monomial(alpha) + "," + ",".join(repr(v) for v in m[i]))
    return "\n".join(lines) + "\n"


def moments_to_csv(y: MomentVector) -> str:
    """Debug serialization: one row per basis monomial, ``index,monomial,value``."""
    from .polynomials import format_monomial

    lines = ["index,monomial,value"]
    for i, alpha in enumerate(y.basis):
        lines.append(f"{i},{format_monomial(alpha)},{y.values[i]!r}")
    return "\n".join(lines) + "\n"
