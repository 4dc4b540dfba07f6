import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from batterydr.lp_model import LpProblem
from batterydr.lp_solver import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    IterationLimitError,
    check_feasibility,
    solve,
)
from oracles import random_bounded_lp, vertex_oracle

METHODS = ["highs", "simplex"]


@pytest.mark.parametrize("method", METHODS)
def test_single_lower_bound(method):
    p = LpProblem.from_dense([1.0], A_ub=[[-1.0]], b_ub=[-3.0], lb=[-np.inf], ub=[np.inf])
    sol = solve(p, method=method)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(3.0) and sol.values[0] == pytest.approx(3.0)


@pytest.mark.parametrize("method", METHODS)
def test_simplex_edge(method):
    p = LpProblem.from_dense([-1.0, -1.0], A_ub=[[1.0, 1.0]], b_ub=[1.0])
    sol = solve(p, method=method)
    assert sol.objective == pytest.approx(-1.0)
    assert sol.values.sum() == pytest.approx(1.0) and sol.values.min() >= -1e-9


@pytest.mark.parametrize("method", METHODS)
def test_unbounded_and_infeasible_are_reported(method):
    unbounded = LpProblem.from_dense([-1.0, 0.0], A_ub=[[-1.0, 1.0]], b_ub=[1.0])
    assert solve(unbounded, method=method).status == UNBOUNDED
    infeasible = LpProblem.from_dense([1.0], A_ub=[[1.0], [-1.0]], b_ub=[1.0, -2.0])
    sol = solve(infeasible, method=method)
    assert sol.status == INFEASIBLE and not sol.optimal


@pytest.mark.parametrize("method", METHODS)
def test_equalities_and_free_variables(method):
    # min x + 2y with x + y = 3, x - y <= 1, y free, x in [0, 10]
    p = LpProblem.from_dense([1.0, 2.0], A_ub=[[1.0, -1.0]], b_ub=[1.0], A_eq=[[1.0, 1.0]], b_eq=[3.0],
                             lb=[0.0, -np.inf], ub=[10.0, np.inf])
    sol = solve(p, method=method)
    assert sol.objective == pytest.approx(2 + 2 * 1)


def test_iteration_cap_raises():
    rng = np.random.default_rng(0)
    c, Au, bu, Ae, be, lb, ub = random_bounded_lp(rng, 6, 8, 0)
    with pytest.raises(IterationLimitError):
        solve(LpProblem.from_dense(-np.abs(c) - 1, Au, bu, Ae, be, lb, ub), method="simplex", max_iter=1)


def test_unknown_method():
    with pytest.raises(ValueError):
        solve(LpProblem.from_dense([1.0]), method="interior")


def test_feasibility_report():
    p = LpProblem.from_dense([1.0], A_ub=[[-1.0]], b_ub=[-3.0], lb=[-np.inf], ub=[np.inf])
    sol = solve(p)
    assert check_feasibility(p, sol.values) == []
    report = check_feasibility(p, [0.0])
    assert len(report) == 1 and report[0][1] == pytest.approx(3.0)


def test_feasibility_report_names_touched_rows():
    # x0 + x1 = 2, x1 + x2 = 3, x2 <= 5; move x0 and only the first equality breaks
    p = LpProblem.from_dense([1.0, 1.0, 1.0], A_ub=[[0, 0, 1.0]], b_ub=[5.0],
                             A_eq=[[1.0, 1.0, 0], [0, 1.0, 1.0]], b_eq=[2.0, 3.0])
    sol = solve(p)
    x = sol.values.copy()
    x[0] += 1.0
    report = check_feasibility(p, x)
    assert [name for name, _ in report] == [p.eq_names[0]]
    assert report[0][1] == pytest.approx(1.0)


def test_feasibility_report_flags_bounds():
    p = LpProblem.from_dense([1.0, 1.0], ub=[1.0, 1.0])
    names = [n for n, _ in check_feasibility(p, [-0.5, 2.0])]
    assert names == ["lower:" + p.var_names[0], "upper:" + p.var_names[1]]


# --- properties -------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(METHODS))
def test_matches_vertex_enumeration(seed, method):
    lp = random_bounded_lp(np.random.default_rng(seed))
    best, _ = vertex_oracle(*lp)
    sol = solve(LpProblem.from_dense(*lp), method=method)
    if best is None:
        assert sol.status == INFEASIBLE
    else:
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(best, abs=1e-6)
        assert check_feasibility(LpProblem.from_dense(*lp), sol.values) == []


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(METHODS))
def test_weak_duality(seed, method):
    # min c x, A x <= b, 0 <= x <= u. Any y >= 0 with A'y_A + y_u >= -c bounds it from below.
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 7)), int(rng.integers(1, 9))
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    u = rng.uniform(1, 5, n)
    b = A @ (rng.random(n) * u) + rng.exponential(1.0, m)
    sol = solve(LpProblem.from_dense(c, A, b, ub=u), method=method)
    assert sol.status == OPTIMAL
    for _ in range(5):
        yA = rng.exponential(1.0, m) * (rng.random(m) < 0.5)
        yu = np.maximum(0.0, -c - A.T @ yA)
        bound = -(b @ yA + u @ yu)
        assert sol.objective >= bound - 1e-6


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from(METHODS))
def test_repeat_solves_are_bitwise_identical(seed, method):
    p = LpProblem.from_dense(*random_bounded_lp(np.random.default_rng(seed)))
    a, b = solve(p, method=method), solve(p, method=method)
    assert a.status == b.status
    if a.optimal:
        assert a.objective == b.objective and np.array_equal(a.values, b.values)


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.01, 100))
def test_positive_scaling_keeps_the_vertex(seed, k):
    lp = list(random_bounded_lp(np.random.default_rng(seed)))
    base = solve(LpProblem.from_dense(*lp), method="simplex")
    lp[0] = lp[0] * k
    scaled = solve(LpProblem.from_dense(*lp), method="simplex")
    assert base.status == scaled.status
    if base.optimal:
        assert np.array_equal(base.values, scaled.values)
        assert scaled.objective == pytest.approx(k * base.objective, rel=1e-12, abs=1e-12)
