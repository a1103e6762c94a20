import numpy as np
import pytest

from tdesign import problems
from tdesign.problem_io import ProblemFormatError, load_problem, parse_problem, serialize_problem

MINIMAL = """
schema 1
n 1
d 2
constraint 1 - x1^2
model eta1
  term 1 fixed: 1
  term x1 fixed: 1
  term x1^2 fixed: 1
model eta2
  term 1 range: [0, 4]
  term x1 range: [0, 4]
mode minmax
option tau_max 2
"""


def test_parse_minimal():
    pf = parse_problem(MINIMAL)
    assert (pf.schema, pf.n, pf.d) == (1, 1, 2)
    assert pf.mode == "minmax"
    assert pf.options == {"tau_max": 2}
    problem = pf.to_problem()
    assert problem.K == 2
    assert problem.options.tau_max == 2
    np.testing.assert_allclose(problem.models[0].box.lower, [1, 1, 1])
    np.testing.assert_allclose(problem.models[1].box.upper, [4, 4, 0])


def test_round_trip_is_stable():
    pf = parse_problem(MINIMAL)
    text = serialize_problem(pf)
    pf2 = parse_problem(text)
    assert serialize_problem(pf2) == text
    assert pf2.models == pf.models
    assert pf2.options == pf.options


def test_all_shipped_problems_round_trip():
    for name in problems.names():
        text = problems.load(name)
        pf = parse_problem(text)
        canon = serialize_problem(pf)
        assert serialize_problem(parse_problem(canon)) == canon
        pf.to_problem()  # builds and validates


@pytest.mark.parametrize(
    "mutation, message",
    [
        ("schema 1", "missing n or d"),
        ("schema 2\nn 1\nd 1", "unsupported schema"),
        (MINIMAL.replace("term 1 fixed: 1", "term 1 pinned: 1"), "'fixed: v' or 'range"),
        (MINIMAL.replace("term x1^2 fixed: 1", "term x1^3 fixed: 1"), "exceeds the declared degree"),
        (MINIMAL.replace("mode minmax", "mode fancy"), "mode must be"),
        (MINIMAL + "bogus 3\n", "unknown field"),
        (MINIMAL + "option turbo 1\n", "unknown option"),
        (MINIMAL.replace("range: [0, 4]", "range: [4, 0]"), "lower bound exceeds"),
    ],
)
def test_parse_errors_are_line_anchored(mutation, message):
    with pytest.raises(ProblemFormatError, match=message):
        parse_problem(mutation)


def test_error_carries_line_number():
    bad = MINIMAL.replace("term x1 fixed: 1", "term x9 fixed: 1")
    with pytest.raises(ProblemFormatError, match=r"line \d+"):
        parse_problem(bad)


def test_weighted_mode_weights():
    text = MINIMAL.replace("mode minmax", "mode weighted\nweight eta2 eta1 0.7\nweight eta1 eta2 0.3")
    problem, pf = load_problem(text)
    assert problem.mode == "weighted"
    # both orderings accumulate on the canonical (j>k) pair
    assert problem.pair_weights() == {(2, 1): pytest.approx(1.0)}


def test_terms_absent_mean_zero():
    problem, _ = load_problem(MINIMAL)
    # x1^2 coefficient of eta2 is an excluded monomial
    assert problem.models[1].box.lower[2] == 0.0
    assert problem.models[1].box.upper[2] == 0.0


def test_example_fixture_contents():
    p1, _ = load_problem(problems.load("example1"))
    assert p1.n == 1 and p1.d == 2 and p1.K == 2
    p6, _ = load_problem(problems.load("example6_weighted"))
    assert p6.mode == "weighted"
    assert p6.pair_weights() == {(2, 1): 0.2, (3, 1): 0.2, (3, 2): 0.6}
