"""Internal normalization of the design domain onto [-1, 1]^n.

Monomial moment data on wide or offset boxes (e.g. a [0, 4] factor) is
catastrophically ill-conditioned: entries span deg powers of the width.
The hierarchy is therefore assembled in normalized coordinates u with
x = offset + scale * u, which keeps every moment in [-1, 1].  Model
parameters never move: the criterion couples to the moments only through
the moment matrix over the original basis, M_x = B M_u B', where B is the
triangular binomial basis-change matrix.  Atoms extracted in u-space map
back exactly.
"""

from __future__ import annotations

import numpy as np

from .polynomials import Polynomial, generate_basis, substitute_affine


class DomainScaling:
    """Per-factor affine map x = offset + scale * u with its induced transforms."""

    def __init__(self, offsets, scales, constraints: list[Polynomial]):
        self.offsets = np.asarray(offsets, dtype=float)
        self.scales = np.asarray(scales, dtype=float)
        if np.any(self.scales <= 0):
            raise ValueError("scales must be positive")
        self.n = self.offsets.size
        self.identity = bool(np.all(self.offsets == 0.0) and np.all(self.scales == 1.0))
        if self.identity:
            self.constraints = list(constraints)
        else:
            self.constraints = [substitute_affine(g, self.offsets, self.scales) for g in constraints]
        self._basis_transform_cache: dict[int, np.ndarray] = {}

    @classmethod
    def from_bounds(cls, bounds: list[tuple[float, float]], constraints: list[Polynomial]) -> "DomainScaling":
        offsets = [0.5 * (lo + hi) for lo, hi in bounds]
        scales = [max(0.5 * (hi - lo), 1e-12) for lo, hi in bounds]
        if all(abs(o) < 1e-12 and abs(s - 1.0) < 1e-12 for o, s in zip(offsets, scales)):
            return cls(np.zeros(len(bounds)), np.ones(len(bounds)), constraints)
        return cls(offsets, scales, constraints)

    def basis_transform(self, d: int) -> np.ndarray:
        """B with f_x(offset + scale*u) = B f_u(u) over the degree-d basis."""
        if d in self._basis_transform_cache:
            return self._basis_transform_cache[d]
        basis = generate_basis(self.n, d)
        B = np.zeros((len(basis), len(basis)))
        if self.identity:
            B = np.eye(len(basis))
        else:
            for r, alpha in enumerate(basis):
                mono = Polynomial(self.n, {alpha: 1.0})
                expanded = substitute_affine(mono, self.offsets, self.scales)
                for beta, c in expanded.terms.items():
                    B[r, basis.index_of(beta)] = c
        self._basis_transform_cache[d] = B
        return B

    def to_design_space(self, points_u) -> list[tuple[float, ...]]:
        return [tuple(self.offsets + self.scales * np.asarray(p, dtype=float)) for p in points_u]

    def from_design_space(self, points_x) -> list[tuple[float, ...]]:
        return [tuple((np.asarray(p, dtype=float) - self.offsets) / self.scales) for p in points_x]
