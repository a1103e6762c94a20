import numpy as np
import pytest

from tdesign.discrim import (
    DeltaResult,
    ModelSpec,
    ParameterBox,
    bounding_box,
    delta_conic,
    delta_direct,
    design_space_grid,
    difference_box,
    minimax_representer,
    probe_minimizers,
    sensitivity,
    support_function_box,
    basis_matrix,
    verify_equivalence,
)
from tdesign.moments import DesignMeasure, build_moment_matrix, moments_of_design
from tdesign.polynomials import generate_basis, parse_polynomial
from tdesign.relax import DiscriminationProblem


def test_support_function_examples():
    box = ParameterBox([0.0, 0.0], [4.0, 4.0])
    assert support_function_box(box, np.array([1.0, -1.0])) == 4.0
    assert support_function_box(box, np.zeros(2)) == 0.0
    other = ParameterBox([1.0, -3.0], [2.0, -1.0])
    assert support_function_box(other, np.array([2.0, 2.0])) == pytest.approx(2.0)


def test_support_function_homogeneous_and_subadditive():
    rng = np.random.default_rng(0)
    for _ in range(30):
        lo = rng.uniform(-3, 0, 4)
        hi = lo + rng.uniform(0, 3, 4)
        box = ParameterBox(lo, hi)
        z1, z2 = rng.normal(size=4), rng.normal(size=4)
        c = rng.uniform(0, 5)
        assert support_function_box(box, c * z1) == pytest.approx(c * support_function_box(box, z1), rel=1e-12)
        assert support_function_box(box, z1 + z2) <= support_function_box(box, z1) + support_function_box(box, z2) + 1e-12
        # width along z is nonnegative
        assert support_function_box(box, z1) + support_function_box(box, -z1) >= -1e-12


def test_delta_direct_identity_boxes():
    res = delta_direct(np.eye(2), ParameterBox([2, 2], [3, 3]), ParameterBox([0, 0], [1, 1]))
    assert res.value == pytest.approx(2.0, abs=1e-10)
    np.testing.assert_allclose(res.u_star, [1.0, 1.0], atol=1e-8)
    np.testing.assert_allclose(res.theta_j - res.theta_k, res.u_star, atol=1e-12)
    assert ParameterBox([2, 2], [3, 3]).contains(res.theta_j)
    assert ParameterBox([0, 0], [1, 1]).contains(res.theta_k)


def test_delta_direct_overlapping_boxes_is_zero():
    res = delta_direct(np.eye(3), ParameterBox([0, 0, 0], [2, 2, 2]), ParameterBox([1, 1, 1], [3, 3, 3]))
    assert res.value == 0.0
    np.testing.assert_allclose(res.u_star, 0.0)


def example1_problem():
    eta1 = ModelSpec("eta1", ParameterBox([1, 1, 1], [1, 1, 1]))
    eta2 = ModelSpec("eta2", ParameterBox([0, 0, 0], [4, 4, 0]))
    return DiscriminationProblem(1, 2, [parse_polynomial("1 - x1^2", 1)], [eta1, eta2])


def example1_design():
    return DesignMeasure([(-1.0,), (0.0,), (1.0,)], [0.25, 0.5, 0.25])


def test_delta_direct_example1_value():
    p = example1_problem()
    M = build_moment_matrix(moments_of_design(example1_design(), 4), 2)
    res = delta_direct(M, p.models[1].box, p.models[0].box)
    assert res.value == pytest.approx(0.25, abs=1e-9)
    # minimizing difference reproduces the sensitivity identity at the support
    basis = generate_basis(1, 2)
    for x in (-1.0, 0.0, 1.0):
        assert sensitivity([x], res.u_star, basis) == pytest.approx(0.25, abs=1e-7)


def test_delta_symmetry():
    rng = np.random.default_rng(3)
    for _ in range(10):
        A = rng.normal(size=(4, 4))
        M = A @ A.T
        lo1 = rng.uniform(-2, 0, 4); hi1 = lo1 + rng.uniform(0, 2, 4)
        lo2 = rng.uniform(-2, 0, 4); hi2 = lo2 + rng.uniform(0, 2, 4)
        b1, b2 = ParameterBox(lo1, hi1), ParameterBox(lo2, hi2)
        r12 = delta_direct(M, b1, b2)
        r21 = delta_direct(M, b2, b1)
        assert r12.value == pytest.approx(r21.value, abs=1e-8)


def test_delta_monotone_in_psd_order():
    rng = np.random.default_rng(4)
    for _ in range(10):
        A = rng.normal(size=(3, 3))
        M = A @ A.T
        B = rng.normal(size=(3, 3))
        M2 = M + B @ B.T  # M2 - M is PSD
        bj = ParameterBox([1, 1, 1], [2, 2, 2])
        bk = ParameterBox([-1, -1, -1], [0, 0, 0])
        assert delta_direct(M2, bj, bk).value >= delta_direct(M, bj, bk).value - 1e-8


def test_delta_direct_agrees_with_conic_dual():
    rng = np.random.default_rng(5)
    for trial in range(25):
        l = int(rng.integers(2, 7))
        A = rng.normal(size=(l, l))
        M = A @ A.T
        lo1 = rng.uniform(-2, 0, l); hi1 = lo1 + rng.uniform(0, 2, l)
        lo2 = rng.uniform(-2, 0, l); hi2 = lo2 + rng.uniform(0, 2, l)
        # occasionally freeze coordinates, as excluded monomials do
        if trial % 3 == 0:
            lo1[0] = hi1[0] = rng.normal()
        b1, b2 = ParameterBox(lo1, hi1), ParameterBox(lo2, hi2)
        direct = delta_direct(M, b1, b2).value
        dual = delta_conic(M, b1, b2)
        assert dual == pytest.approx(direct, abs=1e-6), f"trial {trial}"


def test_sensitivity_trivial_cases():
    basis = generate_basis(1, 2)
    assert sensitivity([0.7], np.zeros(3), basis) == 0.0
    assert sensitivity([0.5], np.array([0.0, 1.0, 0.0]), basis) == pytest.approx(0.25)


def test_bounding_box_from_interval_constraints():
    gs = [parse_polynomial("4*x1 - x1^2", 2), parse_polynomial("1 - x2^2", 2)]
    assert bounding_box(gs, 2) == [(0.0, 4.0), (-1.0, 1.0)]
    # multivariate constraints contribute nothing; default box applies
    ball = [parse_polynomial("1 - x1^2 - x2^2", 2)]
    assert bounding_box(ball, 2) == [(-1.0, 1.0), (-1.0, 1.0)]


def test_design_space_grid_filters_constraints():
    ball = [parse_polynomial("1 - x1^2 - x2^2", 2)]
    grid = design_space_grid(ball, 2, density=41)
    assert np.all(grid[:, 0] ** 2 + grid[:, 1] ** 2 <= 1 + 1e-9)
    assert len(grid) > 1000


def test_design_space_grid_rejects_empty_space():
    g = [parse_polynomial("0 - 1 - x1^2", 1)]  # -1 - x^2 < 0 everywhere
    with pytest.raises(ValueError, match="malformed design space"):
        design_space_grid(g, 1, density=31)


def test_minimax_representer_example1():
    p = example1_problem()
    grid = design_space_grid(p.constraints, 1)
    F = basis_matrix(p.basis, grid)
    u, c = minimax_representer(p.models[1].box, p.models[0].box, F)
    assert c**2 == pytest.approx(0.25, abs=1e-7)
    # least-favorable direction is x^2 - 1/2 up to sign
    np.testing.assert_allclose(np.abs(u), [0.5, 0.0, 1.0], atol=1e-6)


def test_verify_equivalence_passes_example1_optimum():
    p = example1_problem()
    xi = example1_design()
    eq = verify_equivalence(xi, p, moments_of_design(xi, 4))
    assert eq.verdict == "PASS"
    assert eq.criterion_value == pytest.approx(0.25, abs=1e-9)
    assert eq.active_pairs == [(2, 1)]
    slacks = eq.support_slacks[(2, 1)]
    assert max(slacks) <= 1e-6


def test_verify_equivalence_fails_perturbed_example1():
    p = example1_problem()
    xi = DesignMeasure([(-1.0,), (0.0,), (1.0,)], [0.4, 0.2, 0.4])
    eq = verify_equivalence(xi, p, moments_of_design(xi, 4))
    assert eq.verdict == "FAIL"
    assert eq.max_violation > 0.01
    # recomputed criterion for the perturbed design, checked by hand:
    # min over the box gives u = (-0.8, 0, 1), value 0.16
    assert eq.criterion_value == pytest.approx(0.16, abs=1e-6)


def test_verify_equivalence_rejects_mismatched_moments():
    p = example1_problem()
    xi = example1_design()
    other = DesignMeasure([(0.5,)], [1.0])
    with pytest.raises(ValueError, match="disagree"):
        verify_equivalence(xi, p, moments_of_design(other, 4))


def test_probe_minimizers_unique_for_positive_definite():
    rng = np.random.default_rng(6)
    A = rng.normal(size=(3, 3))
    M = A @ A.T + 3 * np.eye(3)
    b1 = ParameterBox([1, 1, 1], [2, 2, 2])
    b2 = ParameterBox([-1, -1, -1], [0, 0, 0])
    best, unique, minimizers = probe_minimizers(M, b1, b2, seed=1)
    assert unique
    assert len(minimizers) >= 1


def test_sensitivity_sign_invariance():
    basis = generate_basis(2, 2)
    rng = np.random.default_rng(7)
    u = rng.normal(size=len(basis))
    for _ in range(10):
        x = rng.uniform(-1, 1, 2)
        assert sensitivity(x, u, basis) == pytest.approx(sensitivity(x, -u, basis), rel=1e-12)


def test_design_space_grid_high_dimension_branches():
    gs4 = [parse_polynomial(f"1 - x{i+1}^2", 4) for i in range(4)]
    grid4 = design_space_grid(gs4, 4)
    assert grid4.shape[1] == 4
    assert len(grid4) == 21**4  # dense lattice still fits the budget
    gs5 = [parse_polynomial(f"1 - x{i+1}^2", 5) for i in range(5)]
    grid5 = design_space_grid(gs5, 5, random_samples=2000)
    # vertices plus the seeded feasible sample
    assert len(grid5) == 2**5 + 2000
    assert np.all(np.abs(grid5) <= 1 + 1e-12)


def test_minimax_representer_cutting_planes():
    p = example1_problem()
    grid = design_space_grid(p.constraints, 1)
    F = basis_matrix(p.basis, grid)
    # force the subsample/cutting path with a tiny LP row budget
    u, c = minimax_representer(p.models[1].box, p.models[0].box, F, lp_rows_cap=15)
    assert c**2 == pytest.approx(0.25, abs=1e-5)
