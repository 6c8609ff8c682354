import math
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from nnembed.milp import MilpModel
from nnembed.solver.lp import LpConfig, SimplexLP, solve_lp


def lp_bounded() -> MilpModel:
    m = MilpModel()
    m.add_var("x", 0.0, 5.0, obj=-1.0)
    return m


def lp_two_by_two() -> MilpModel:
    m = MilpModel()
    x = m.add_var("x", obj=1.0)
    y = m.add_var("y", obj=1.0)
    m.add_constraint("r1", {x: 1, y: 2}, ">=", 4)
    m.add_constraint("r2", {x: 3, y: 1}, ">=", 6)
    return m


def lp_unbounded() -> MilpModel:
    m = MilpModel()
    m.add_var("x", 0.0, math.inf, obj=-1.0)
    return m


def test_bounded_single_variable():
    sol = solve_lp(lp_bounded())
    assert sol.status == "optimal"
    assert abs(sol.objective + 5.0) <= 1e-9
    assert abs(sol.values[0] - 5.0) <= 1e-9


def test_two_by_two_hand_solution():
    # tight system x + 2y = 4, 3x + y = 6 gives x = 8/5, y = 6/5
    sol = solve_lp(lp_two_by_two())
    assert sol.status == "optimal"
    assert abs(sol.objective - 2.8) <= 1e-9
    assert abs(sol.values[0] - 1.6) <= 1e-9
    assert abs(sol.values[1] - 1.2) <= 1e-9


def test_unbounded():
    assert solve_lp(lp_unbounded()).status == "unbounded"


def test_infeasible_rows():
    m = MilpModel()
    x = m.add_var("x", 0, 10)
    y = m.add_var("y", 0, 10)
    m.add_constraint("lo", {x: 1, y: 1}, ">=", 15)
    m.add_constraint("hi", {x: 1, y: 1}, "<=", 12)
    assert solve_lp(m).status == "infeasible"


def test_integrality_ignored():
    m = MilpModel()
    a = m.add_binary("a", -1.0)
    m.add_constraint("half", {a: 2}, "<=", 1)
    sol = solve_lp(m)
    assert sol.optimal and sol.values[0] == pytest.approx(0.5, abs=1e-12)


def test_warm_restart_with_new_bounds():
    arr = lp_two_by_two().arrays()
    lp = SimplexLP(arr)
    first = lp.solve()
    lb = arr.lb.copy()
    lb[0] = 3.0
    second = lp.solve(lb, arr.ub, first.basis)
    cold = SimplexLP(arr).solve(lb, arr.ub)
    assert second.optimal and second.objective == pytest.approx(cold.objective, abs=1e-9)
    assert second.objective == pytest.approx(3.5, abs=1e-9)  # x = 3, y = 1/2


def test_hand_examples_fast_and_deterministic():
    start = time.perf_counter()
    for build in (lp_bounded, lp_two_by_two, lp_unbounded):
        a, b = solve_lp(build()), solve_lp(build())
        assert a.status == b.status and a.iterations == b.iterations
        if a.optimal:
            assert np.array_equal(a.values, b.values)
    assert time.perf_counter() - start < 1.0


def test_degenerate_cycling_example_terminates():
    # Beale's classic cycling LP; a stall threshold of 1 forces the anti-cycling path
    m = MilpModel()
    x = [m.add_var(f"x{i}", obj=c) for i, c in enumerate([-0.75, 150, -0.02, 6])]
    m.add_constraint("r1", dict(zip(x, [0.25, -60, -0.04, 9])), "<=", 0)
    m.add_constraint("r2", dict(zip(x, [0.5, -90, -0.02, 3])), "<=", 0)
    m.add_constraint("r3", {x[2]: 1}, "<=", 1)
    sol = solve_lp(m, LpConfig(stall_threshold=1, scaling=False))
    assert sol.optimal and sol.objective == pytest.approx(-0.05, abs=1e-9)


@st.composite
def random_lp(draw):
    n = draw(st.integers(1, 6))
    rows = draw(st.integers(0, 6))
    coef = st.integers(-5, 5)
    c = [draw(coef) for _ in range(n)]
    ub = [draw(st.sampled_from([1.0, 3.0, 10.0])) for _ in range(n)]
    A = [[draw(coef) for _ in range(n)] for _ in range(rows)]
    senses = [draw(st.sampled_from(["<=", ">=", "="])) for _ in range(rows)]
    rhs = [draw(st.integers(-6, 12)) for _ in range(rows)]
    return c, ub, A, senses, rhs


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(random_lp())
def test_matches_scipy_linprog(data):
    c, ub, A, senses, rhs = data
    m = MilpModel()
    cols = [m.add_var(f"x{j}", 0.0, u, obj=cj) for j, (cj, u) in enumerate(zip(c, ub))]
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i, (row, sense, r) in enumerate(zip(A, senses, rhs)):
        m.add_constraint(f"r{i}", dict(zip(cols, row)), sense, r)
        if sense == "<=":
            A_ub.append(row), b_ub.append(r)
        elif sense == ">=":
            A_ub.append([-v for v in row]), b_ub.append(-r)
        else:
            A_eq.append(row), b_eq.append(r)
    ref = linprog(
        c,
        A_ub=A_ub or None,
        b_ub=b_ub or None,
        A_eq=A_eq or None,
        b_eq=b_eq or None,
        bounds=list(zip([0.0] * len(ub), ub)),
        method="highs",
    )
    sol = solve_lp(m)
    if ref.status == 2:
        assert sol.status == "infeasible"
        return
    assert ref.status == 0
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(ref.fun, abs=1e-7)
    x = sol.values
    assert np.all(x >= -1e-9) and np.all(x <= np.array(ub) + 1e-9)
    for row, sense, r in zip(A, senses, rhs):
        act = float(np.dot(row, x))
        if sense == "<=":
            assert act <= r + 1e-9
        elif sense == ">=":
            assert act >= r - 1e-9
        else:
            assert abs(act - r) <= 1e-9
