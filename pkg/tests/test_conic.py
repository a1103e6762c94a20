import sys

import numpy as np
import pytest

from tdesign.conic import (
    ConicProgram,
    FormatError,
    SolverOptions,
    parse_program,
    parse_solution,
    serialize_program,
    serialize_solution,
    solve,
    solve_external,
)


def max_t_correlation_program():
    # maximize t subject to [[1, t], [t, 1]] >= 0; optimum t = 1
    p = ConicProgram(1)
    p.set_objective({0: 1.0})
    blk = p.add_psd_block(2)
    blk.add(0, 0, None, 1.0)
    blk.add(1, 1, None, 1.0)
    blk.add(0, 1, 0, 1.0)
    return p


def test_psd_correlation_bound():
    res = solve(max_t_correlation_program())
    assert res.status == "optimal"
    assert res.objective == pytest.approx(1.0, abs=1e-7)


def test_trace_with_fixed_diagonal():
    # maximize -trace(X) over X >= 0 with diag(X) = (1, 1): optimum -2
    # X parameterized by its three entries x00, x01, x11
    p = ConicProgram(3)
    p.set_objective({0: -1.0, 2: -1.0})
    blk = p.add_psd_block(2)
    blk.add(0, 0, 0, 1.0)
    blk.add(0, 1, 1, 1.0)
    blk.add(1, 1, 2, 1.0)
    p.add_equality({0: 1.0}, 1.0)
    p.add_equality({2: 1.0}, 1.0)
    res = solve(p)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-2.0, abs=1e-7)
    assert abs(res.x[1]) <= 1.0 + 1e-6


def test_min_eigenvalue_via_lmi():
    # maximize t s.t. A - t I >= 0 with A = diag(3, 1): t* = lambda_min = 1
    p = ConicProgram(1)
    p.set_objective({0: 1.0})
    blk = p.add_psd_block(2)
    blk.add(0, 0, None, 3.0)
    blk.add(1, 1, None, 1.0)
    blk.add(0, 0, 0, -1.0)
    blk.add(1, 1, 0, -1.0)
    res = solve(p)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(1.0, abs=1e-7)


def test_pure_lp():
    # maximize x0 + x1 s.t. x0 <= 2, x1 <= 3, x0, x1 >= 0
    p = ConicProgram(2)
    p.set_objective({0: 1.0, 1: 1.0})
    p.add_nonneg({0: -1.0}, 2.0)
    p.add_nonneg({1: -1.0}, 3.0)
    p.add_nonneg({0: 1.0})
    p.add_nonneg({1: 1.0})
    res = solve(p)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(5.0, abs=1e-7)
    np.testing.assert_allclose(res.x, [2.0, 3.0], atol=1e-6)


def test_lp_cross_checked_against_scipy():
    from scipy.optimize import linprog

    rng = np.random.default_rng(42)
    for _ in range(10):
        n, m = 4, 7
        A = rng.normal(size=(m, n))
        b = rng.uniform(1.0, 2.0, size=m)  # x=0 strictly feasible
        c = rng.normal(size=n)
        p = ConicProgram(n)
        p.set_objective(c)
        for r in range(m):
            p.add_nonneg({j: -A[r, j] for j in range(n)}, b[r])
        # keep it bounded
        for j in range(n):
            p.add_nonneg({j: -1.0}, 10.0)
            p.add_nonneg({j: 1.0}, 10.0)
        res = solve(p)
        ref = linprog(-c, A_ub=np.vstack([A, np.eye(n), -np.eye(n)]),
                      b_ub=np.concatenate([b, 10 * np.ones(2 * n)]), bounds=[(None, None)] * n)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(-ref.fun, abs=1e-6)


def test_infeasible_lp():
    p = ConicProgram(1)
    p.set_objective({0: 1.0})
    p.add_nonneg({0: 1.0}, -2.0)  # x >= 2
    p.add_nonneg({0: -1.0}, 1.0)  # x <= 1
    res = solve(p)
    assert res.status == "infeasible"


def test_unbounded_lp():
    p = ConicProgram(1)
    p.set_objective({0: 1.0})
    p.add_nonneg({0: 1.0}, 0.0)  # x >= 0, maximize x
    res = solve(p)
    assert res.status == "unbounded"


def test_solver_determinism():
    p = max_t_correlation_program()
    r1 = solve(p)
    r2 = solve(p)
    assert r1.objective == pytest.approx(r2.objective, abs=1e-9)
    np.testing.assert_allclose(r1.x, r2.x, atol=1e-9)


def random_sdp(rng, n_vars=4, size=3):
    """Random bounded LMI problem: maximize c.x s.t. F0 + sum x_j Fj >= 0, |x| <= 2."""
    p = ConicProgram(n_vars)
    c = rng.normal(size=n_vars)
    p.set_objective(c)
    blk = p.add_psd_block(size)
    F0 = rng.normal(size=(size, size))
    F0 = F0 @ F0.T + size * np.eye(size)  # x = 0 strictly feasible
    for i in range(size):
        for j in range(i, size):
            blk.add(i, j, None, F0[i, j])
    for v in range(n_vars):
        Fv = rng.normal(size=(size, size))
        Fv = 0.5 * (Fv + Fv.T)
        for i in range(size):
            for j in range(i, size):
                blk.add(i, j, v, Fv[i, j])
    for v in range(n_vars):
        p.add_nonneg({v: -1.0}, 2.0)
        p.add_nonneg({v: 1.0}, 2.0)
    return p


def test_random_sdps_weak_duality_and_kkt():
    rng = np.random.default_rng(0)
    for trial in range(20):
        p = random_sdp(rng)
        res = solve(p)
        # degenerate instances may stop a decade short of the certified gap;
        # the point must still be fully usable and satisfy the KKT checks below
        assert res.usable(), f"trial {trial}: {res.status} {res.message}"
        # primal feasibility of the returned point
        assert p.feasibility_violation(res.x) <= 1e-6
        # weak duality versus interior feasible point x = 0
        assert 0.0 <= res.objective + 1e-6 or p.objective @ res.x >= -1e-6
        # complementary slackness on the PSD block
        S = p.psd_blocks[0].evaluate(res.x)
        Z = res.dual_psd[0]
        comp = abs(float(np.tensordot(S, Z))) / max(1.0, abs(res.objective))
        assert comp <= 1e-6, f"trial {trial}: complementarity {comp}"


def test_weak_duality_against_feasible_grid():
    # random feasible points never beat the reported optimum
    rng = np.random.default_rng(1)
    p = random_sdp(rng, n_vars=3, size=3)
    res = solve(p)
    assert res.status == "optimal"
    for _ in range(200):
        x = rng.uniform(-2, 2, size=3)
        if p.feasibility_violation(x) <= 1e-9:
            assert p.objective @ x <= res.objective + 1e-6


def test_equality_constrained_sdp():
    # maximize x0 with [[x0, 0], [0, x1]] >= 0 and x0 + x1 = 1 -> x0 = 1
    p = ConicProgram(2)
    p.set_objective({0: 1.0})
    blk = p.add_psd_block(2)
    blk.add(0, 0, 0, 1.0)
    blk.add(1, 1, 1, 1.0)
    p.add_equality({0: 1.0, 1: 1.0}, 1.0)
    res = solve(p)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(1.0, abs=1e-7)


def test_boundary_only_feasible_set():
    # pinned singular corner: [[1, 1], [1, x]] >= 0 and minimize x -> x = 1 with
    # the optimal matrix singular; exercises convergence without a strict interior
    p = ConicProgram(1)
    p.set_objective({0: -1.0})
    blk = p.add_psd_block(2)
    blk.add(0, 0, None, 1.0)
    blk.add(0, 1, None, 1.0)
    blk.add(1, 1, 0, 1.0)
    res = solve(p)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-1.0, abs=1e-6)


# -- text format --------------------------------------------------------------


def test_round_trip_identity():
    p = random_sdp(np.random.default_rng(3))
    p.add_equality({0: 1.0, 2: -0.5}, 0.25)
    text = serialize_program(p)
    q = parse_program(text)
    assert serialize_program(q) == text
    r1, r2 = solve(p), solve(q)
    assert r1.objective == pytest.approx(r2.objective, abs=1e-9)


def test_pure_lp_serialization_accepted():
    p = ConicProgram(2)
    p.set_objective({0: 1.0, 1: 1.0})
    p.add_nonneg({0: -1.0}, 2.0)
    p.add_nonneg({1: -1.0}, 3.0)
    p.add_nonneg({0: 1.0})
    p.add_nonneg({1: 1.0})
    q = parse_program(serialize_program(p))
    assert len(q.psd_blocks) == 0
    res = solve(q)
    assert res.objective == pytest.approx(5.0, abs=1e-7)


def test_parse_errors_are_line_anchored():
    with pytest.raises(FormatError, match="line 1"):
        parse_program("bogus 1 2 3\n")
    with pytest.raises(FormatError, match="line 2"):
        parse_program("conic 2 0 0 1\nnn 5 0 1.0\n")
    with pytest.raises(FormatError, match="out of range"):
        parse_program("conic 2 0 1 0\npsd 0 2\nentry 0 0 5 const 1.0\n")


def test_solution_round_trip():
    res = solve(max_t_correlation_program())
    text = serialize_solution(res, 1)
    back = parse_solution(text, 1)
    assert back.status == "optimal"
    assert back.objective == pytest.approx(res.objective)
    np.testing.assert_allclose(back.x, res.x)


def test_external_driver_round_trip():
    command = f"{sys.executable} -m tdesign.conic.driver"
    res = solve_external(max_t_correlation_program(), command, timeout=120)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(1.0, abs=1e-6)


def test_external_solver_failure_is_reported():
    from tdesign.conic import ExternalSolverError

    with pytest.raises(ExternalSolverError):
        solve_external(max_t_correlation_program(), "/bin/false", timeout=30)


def test_solver_tolerances_respected():
    res = solve(max_t_correlation_program(), SolverOptions(gap_tol=1e-10, feas_tol=1e-10))
    assert res.status == "optimal"
    assert res.gap <= 1e-9


def test_cvxpy_driver_solves_example1_relaxation():
    pytest.importorskip("cvxpy")
    from tdesign import problems
    from tdesign.problem_io import load_problem
    from tdesign.relax import build_relaxation

    problem, _ = load_problem(problems.load("example1"))
    prog, _ = build_relaxation(problem, 0)
    command = f"{sys.executable} -m tdesign.conic.cvxpy_driver"
    res = solve_external(prog, command, timeout=300)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(0.25, abs=1e-5)
