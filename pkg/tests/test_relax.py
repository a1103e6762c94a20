import numpy as np
import pytest

from tdesign.conic import solve
from tdesign.discrim import ModelSpec, ParameterBox, delta_direct
from tdesign.moments import DesignMeasure, build_moment_matrix, moments_of_design
from tdesign.polynomials import generate_basis, parse_polynomial
from tdesign.relax import (
    DiscriminationProblem,
    RunOptions,
    build_relaxation,
    optimize_support_weights,
    run_hierarchy,
)


def example1_problem(**kw):
    eta1 = ModelSpec("eta1", ParameterBox([1, 1, 1], [1, 1, 1]))
    eta2 = ModelSpec("eta2", ParameterBox([0, 0, 0], [4, 4, 0]))
    return DiscriminationProblem(1, 2, [parse_polynomial("1 - x1^2", 1)], [eta1, eta2], **kw)


def test_problem_validation():
    eta1 = ModelSpec("m1", ParameterBox([1, 1, 1], [1, 1, 1]))
    with pytest.raises(ValueError, match="two models"):
        DiscriminationProblem(1, 2, [parse_polynomial("1 - x1^2", 1)], [eta1])
    with pytest.raises(ValueError, match="box length"):
        DiscriminationProblem(1, 2, [parse_polynomial("1 - x1^2", 1)],
                              [eta1, ModelSpec("m2", ParameterBox([0], [1]))])
    with pytest.raises(ValueError, match="constant"):
        DiscriminationProblem(1, 2, [parse_polynomial("2", 1)],
                              [eta1, ModelSpec("m2", ParameterBox([0, 0, 0], [1, 1, 1]))])


def test_pair_enumeration():
    boxes = [ModelSpec(f"m{i}", ParameterBox([0, 0], [i + 1, 1])) for i in range(3)]
    p = DiscriminationProblem(1, 1, [parse_polynomial("1 - x1^2", 1)], boxes)
    assert p.pairs() == [(2, 1), (3, 1), (3, 2)]


def test_example1_block_structure():
    p = example1_problem()
    prog, layout = build_relaxation(p, 0)
    # Schur 3+1, moment matrix 3, localizing 2
    assert layout.block_sizes == [4, 3, 2]
    res = solve(prog)
    assert res.usable()
    assert res.objective == pytest.approx(0.25, abs=1e-6)


def test_identical_models_warn_and_solve_to_zero():
    m = ParameterBox([0, 0, 0], [4, 4, 4])
    p = DiscriminationProblem(1, 2, [parse_polynomial("1 - x1^2", 1)],
                              [ModelSpec("a", m), ModelSpec("b", m)])
    prog, layout = build_relaxation(p, 0)
    assert layout.warnings and "indistinguishable" in layout.warnings[0]
    res = solve(prog)
    assert res.objective == pytest.approx(0.0, abs=1e-6)


def test_hierarchy_example1_converges_at_zero():
    sol = run_hierarchy(example1_problem())
    assert sol.tau == 0
    assert sol.converged
    assert sol.value == pytest.approx(0.25, abs=1e-6)
    assert [s.tau for s in sol.trace] == [0, 1]
    assert sol.trace[0].log_line().startswith("tau=0 obj=0.25")


def test_hierarchy_trace_nonincreasing():
    sol = run_hierarchy(example1_problem(), tau_max=2, stall_tol=0.0)
    values = [s.objective for s in sol.trace]
    for a, b in zip(values, values[1:]):
        assert b <= a + 1e-7


def test_relaxation_dominates_any_feasible_design():
    # criterion of any concrete design is a lower bound for the relaxation optimum
    p = example1_problem()
    sol = run_hierarchy(p)
    rng = np.random.default_rng(0)
    for _ in range(10):
        pts = rng.uniform(-1, 1, size=rng.integers(2, 5))
        w = rng.dirichlet(np.ones(len(pts)))
        xi = DesignMeasure([(float(t),) for t in pts], w)
        M = build_moment_matrix(moments_of_design(xi, 4), 2)
        val = delta_direct(M, p.models[1].box, p.models[0].box).value
        assert val <= sol.value + 1e-6


def test_pair_values_match_objective():
    p = example1_problem()
    sol = run_hierarchy(p)
    assert min(sol.pair_values.values()) == pytest.approx(sol.value, abs=1e-6)


def test_weighted_mode_single_pair_equals_minmax():
    # all weight on the only pair reproduces the two-model solution
    p_min = example1_problem()
    p_w = example1_problem(mode="weighted", weights={(2, 1): 1.0})
    v1 = run_hierarchy(p_min).value
    v2 = run_hierarchy(p_w).value
    assert v2 == pytest.approx(v1, abs=1e-6)


def test_optimize_support_weights_example1():
    p = example1_problem()
    w, val = optimize_support_weights([(-1.0,), (0.0,), (1.0,)], p)
    np.testing.assert_allclose(w, [0.25, 0.5, 0.25], atol=1e-4)
    assert val == pytest.approx(0.25, abs=1e-7)


def test_run_options_from_problem():
    p = example1_problem(options=RunOptions(tau_max=0))
    sol = run_hierarchy(p)
    assert sol.tau == 0
    assert not sol.converged  # only one order solved, no confirmation


def test_domain_scaling_attached():
    gs = [parse_polynomial("4*x1 - x1^2", 2), parse_polynomial("1 - x2^2", 2)]
    m1 = ModelSpec("a", ParameterBox(np.zeros(6), np.ones(6)))
    lo = np.zeros(6); lo[5] = 1.0
    hi = np.ones(6) * 2.0; hi[5] = 3.0
    m2 = ModelSpec("b", ParameterBox(lo, hi))
    p = DiscriminationProblem(2, 2, gs, [m1, m2])
    assert not p.scaling.identity
    np.testing.assert_allclose(p.scaling.offsets, [2.0, 0.0])
    np.testing.assert_allclose(p.scaling.scales, [2.0, 1.0])
    # normalized constraints are supported on [-1, 1]^2
    for g in p.scaling.constraints:
        assert g.evaluate([0.0, 0.0]) > 0
        assert g.evaluate([1.5, 0.0]) < 0 or g.evaluate([0.0, 1.5]) < 0
