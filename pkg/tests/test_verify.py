import math

import pytest

from nnembed.milp import MilpModel
from nnembed.solver.mip import solve_mip
from nnembed.solver.verify import verify


def knapsack() -> MilpModel:
    m = MilpModel("knapsack")
    a = m.add_binary("a", -5)
    b = m.add_binary("b", -4)
    m.add_constraint("weight", {a: 6, b: 4}, "<=", 9)
    return m


def test_hand_point_objective():
    rep = verify(knapsack(), [1, 0])
    assert rep.ok and rep.objective == -5.0 and rep.max_violation == 0.0


def test_optimal_solution_clean():
    m = knapsack()
    assert verify(m, solve_mip(m).values).ok


def test_fractional_binary_flagged():
    m = MilpModel()
    m.add_binary("x[v,p]")
    rep = verify(m, [0.4], integrality_tol=1e-6)
    assert not rep.ok
    assert any("integrality" in v for v in rep.violations)
    assert rep.max_violation == pytest.approx(0.4)


def test_row_and_bound_violations():
    m = knapsack()
    rep = verify(m, [1, 1])
    assert len(rep.violations) == 1 and "weight" in rep.violations[0]
    rep = verify(m, [1.5, -0.5])
    assert sum("bound" in v for v in rep.violations) == 2


def test_equality_and_nan():
    m = MilpModel()
    x = m.add_var("x", -math.inf, math.inf)
    m.add_constraint("eq", {x: 1}, "=", 2)
    assert verify(m, [2.0]).ok
    assert not verify(m, [2.1]).ok
    assert not verify(m, [math.nan]).ok


def test_length_mismatch():
    rep = verify(knapsack(), [1])
    assert not rep.ok and "expected 2" in rep.violations[0]


def test_relative_row_tolerance():
    m = MilpModel()
    x = m.add_var("x")
    m.add_constraint("big", {x: 1e6}, "<=", 1e6)
    assert verify(m, [1.0 + 1e-10]).ok
    assert not verify(m, [1.0 + 1e-6]).ok
