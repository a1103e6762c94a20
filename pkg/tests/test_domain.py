import numpy as np
import pytest

from tdesign.domain import DomainScaling
from tdesign.moments import DesignMeasure, build_moment_matrix, moments_of_design
from tdesign.polynomials import Polynomial, generate_basis, parse_polynomial, substitute_affine
from tdesign.discrim import basis_matrix, bounding_box


def test_substitute_affine_expands_binomially():
    g = parse_polynomial("4*x1 - x1^2", 1)
    # x1 = 2 + 2u: g becomes 4 - 4u^2
    out = substitute_affine(g, [2.0], [2.0])
    assert out.terms == {(0,): 4.0, (2,): -4.0}


def test_substitute_affine_matches_pointwise():
    rng = np.random.default_rng(0)
    p = Polynomial(2, {(2, 1): 1.5, (0, 3): -0.5, (1, 0): 2.0, (0, 0): 0.25})
    offsets, scales = [0.7, -0.3], [1.4, 0.6]
    q = substitute_affine(p, offsets, scales)
    for _ in range(20):
        u = rng.uniform(-1, 1, 2)
        x = np.array(offsets) + np.array(scales) * u
        assert q.evaluate(u) == pytest.approx(p.evaluate(x), rel=1e-12, abs=1e-12)


def test_identity_scaling_shortcut():
    gs = [parse_polynomial("1 - x1^2", 1)]
    sc = DomainScaling.from_bounds([(-1.0, 1.0)], gs)
    assert sc.identity
    np.testing.assert_allclose(sc.basis_transform(3), np.eye(4))


def test_basis_transform_congruence_matches_moment_matrix():
    # M over the original basis equals B M_u B' for the normalized measure
    gs = [parse_polynomial("4*x1 - x1^2", 2), parse_polynomial("1 - x2^2", 2)]
    sc = DomainScaling.from_bounds(bounding_box(gs, 2), gs)
    assert not sc.identity
    rng = np.random.default_rng(1)
    pts_u = rng.uniform(-1, 1, size=(4, 2))
    w = rng.dirichlet(np.ones(4))
    xi_u = DesignMeasure([tuple(p) for p in pts_u], w)
    xi_x = DesignMeasure(sc.to_design_space(xi_u.points), w)
    d = 2
    M_x = build_moment_matrix(moments_of_design(xi_x, 2 * d), d)
    M_u = build_moment_matrix(moments_of_design(xi_u, 2 * d), d)
    B = sc.basis_transform(d)
    np.testing.assert_allclose(M_x, B @ M_u @ B.T, rtol=1e-10, atol=1e-10)


def test_point_maps_round_trip():
    gs = [parse_polynomial("4*x1 - x1^2", 2), parse_polynomial("1 - x2^2", 2)]
    sc = DomainScaling.from_bounds(bounding_box(gs, 2), gs)
    pts = [(0.0, -1.0), (4.0, 1.0), (1.3, 0.2)]
    back = sc.to_design_space(sc.from_design_space(pts))
    np.testing.assert_allclose(back, pts, atol=1e-12)


def test_normalized_constraints_supported_on_unit_box():
    gs = [parse_polynomial("4*x1 - x1^2", 2), parse_polynomial("1 - x2^2", 2)]
    sc = DomainScaling.from_bounds(bounding_box(gs, 2), gs)
    for g in sc.constraints:
        assert g.evaluate([0.0, 0.0]) > 0
        assert g.evaluate([1.0, 1.0]) >= -1e-12
        assert min(g.evaluate([1.2, 0.0]), g.evaluate([0.0, 1.2])) < 0
