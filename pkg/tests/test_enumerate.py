import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnembed.errors import ModelError
from nnembed.milp import MilpModel
from nnembed.oracle import random_milp
from nnembed.solver.enumerate import enumerate_exact
from nnembed.solver.lp import solve_lp
from nnembed.solver.mip import solve_mip
from nnembed.solver.verify import verify


def knapsack() -> MilpModel:
    m = MilpModel("knapsack")
    a = m.add_binary("a", -5)
    b = m.add_binary("b", -4)
    m.add_constraint("weight", {a: 6, b: 4}, "<=", 9)
    return m


def test_knapsack_matches_solve_mip():
    ref, res = enumerate_exact(knapsack()), solve_mip(knapsack())
    assert ref.status == res.status == "optimal"
    assert ref.objective == pytest.approx(-5.0) and res.objective == pytest.approx(ref.objective)
    assert np.allclose(ref.values, res.values)


def test_all_continuous_equals_solve_lp():
    m = MilpModel()
    x = m.add_var("x", obj=1.0)
    y = m.add_var("y", obj=1.0)
    m.add_constraint("r1", {x: 1, y: 2}, ">=", 4)
    m.add_constraint("r2", {x: 3, y: 1}, ">=", 6)
    ref = enumerate_exact(m)
    assert ref.status == "optimal"
    assert ref.objective == pytest.approx(solve_lp(m).objective, abs=1e-9)


def test_infeasible_binary_model():
    m = MilpModel()
    a = m.add_binary("a")
    b = m.add_binary("b")
    m.add_constraint("both", {a: 1, b: 1}, ">=", 3)
    assert enumerate_exact(m).status == "infeasible"


def test_cap_refused():
    m = MilpModel()
    for i in range(26):
        m.add_binary(f"b{i}")
    with pytest.raises(ModelError, match="cap"):
        enumerate_exact(m)
    small = MilpModel()
    for i in range(4):
        small.add_binary(f"b{i}")
    with pytest.raises(ModelError):
        enumerate_exact(small, cap=3)


def test_non_binary_refused():
    m = MilpModel()
    m.add_var("n", 0, 2, integral=True)
    with pytest.raises(ModelError, match="binary"):
        enumerate_exact(m)


def test_free_continuous_columns():
    # a continuous column in no row sits at its cost-preferred bound
    m = MilpModel()
    a = m.add_binary("a", -1.0)
    m.add_var("free", -2.0, 3.0, obj=1.0)
    m.add_constraint("r", {a: 1}, "<=", 1)
    ref = enumerate_exact(m)
    assert ref.objective == pytest.approx(-3.0)
    assert np.allclose(ref.values, [1.0, -2.0])


def test_unbounded_remainder():
    m = MilpModel()
    a = m.add_binary("a")
    x = m.add_var("x", 0.0, np.inf, obj=-1.0)
    m.add_constraint("r", {a: 1, x: 1}, ">=", 1)
    assert enumerate_exact(m).status == "limit-reached"


def test_fixed_binaries_respected():
    m = knapsack()
    m.add_constraint("no_a", {0: 1}, "<=", 0)
    ref = enumerate_exact(m)
    assert ref.objective == pytest.approx(-4.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_optimum_is_feasible_and_no_worse_than_reference(seed):
    # random models are built around a hidden feasible point, so they are never infeasible
    m = random_milp(seed, max_binaries=12, max_rows=15)
    ref = enumerate_exact(m)
    assert ref.status == "optimal"
    assert verify(m, ref.values, 1e-7, 1e-9).ok
    assert m.objective_value(ref.values) == pytest.approx(ref.objective, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("seed, expected", [(39, -2.5393803463353795), (41, -29.09891804279517)])
def test_pruned_searches_frozen(seed, expected):
    # instances where dual floors skip most remainder LPs; values agree with branch-and-bound
    m = random_milp(seed)
    ref = enumerate_exact(m)
    assert ref.objective == pytest.approx(expected, rel=1e-9)
    assert ref.objective == pytest.approx(solve_mip(m).objective, rel=1e-6)
    assert verify(m, ref.values, 1e-7, 1e-9).ok
