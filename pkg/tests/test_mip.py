import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnembed.errors import ModelError
from nnembed.milp import MilpModel
from nnembed.oracle import random_milp
from nnembed.solver.enumerate import enumerate_exact
from nnembed.solver.mip import BranchAndBound, SolverConfig, relative_gap, solve_mip
from nnembed.solver.verify import verify


def knapsack() -> MilpModel:
    m = MilpModel("knapsack")
    a = m.add_binary("a", -5)
    b = m.add_binary("b", -4)
    m.add_constraint("weight", {a: 6, b: 4}, "<=", 9)
    return m


def test_knapsack():
    res = solve_mip(knapsack())
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-5.0, abs=1e-9)
    assert np.allclose(res.values, [1, 0])
    assert res.bound <= res.objective + 1e-9


def test_integral_relaxation_solves_at_root():
    m = MilpModel()
    x = [m.add_binary(f"x{i}", c) for i, c in enumerate([3.0, 1.0, 2.0])]
    m.add_constraint("pick_one", {j: 1 for j in x}, "=", 1)
    res = solve_mip(m)
    assert res.status == "optimal" and res.nodes == 1
    assert res.objective == pytest.approx(1.0)


def test_contradictory_bounds_infeasible():
    m = MilpModel()
    a = m.add_binary("a", 1.0)
    m.add_constraint("ge", {a: 1}, ">=", 1)
    m.add_constraint("le", {a: 1}, "<=", 0)
    res = solve_mip(m)
    assert res.status == "infeasible" and res.values is None
    assert math.isinf(res.objective)


def test_non_binary_integer_refused():
    m = MilpModel()
    m.add_var("n", 0, 3, integral=True)
    with pytest.raises(ModelError):
        solve_mip(m)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(gap_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(branching="strong")
    cfg = SolverConfig(gap_tol=0.01, node_limit=5)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg


def test_relative_gap_definition():
    assert relative_gap(10.0, 9.0) == pytest.approx(0.1)
    assert relative_gap(0.5, 0.0) == pytest.approx(0.5)  # denominator floors at 1
    assert relative_gap(math.inf, 0.0) == math.inf


@pytest.mark.parametrize("seed", [3, 11, 17])
def test_determinism(seed):
    m = random_milp(seed)
    a, b = solve_mip(m), solve_mip(m)
    assert a.status == b.status and a.nodes == b.nodes and a.lp_iterations == b.lp_iterations
    assert a.objective == b.objective and np.array_equal(a.values, b.values)
    assert a.bound_history == b.bound_history


class Recording(BranchAndBound):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.accepted: list[np.ndarray] = []

    def offer(self, values) -> bool:
        ok = super().offer(values)
        if ok:
            self.accepted.append(self.incumbent.copy())
        return ok


@pytest.mark.parametrize("seed", [1, 2, 5, 8, 13])
def test_bound_monotone_and_incumbents_verified(seed):
    m = random_milp(seed)
    bb = Recording(m, SolverConfig())
    res = bb.run()
    hist = res.bound_history
    assert all(b2 >= b1 for b1, b2 in zip(hist, hist[1:]))
    if res.values is not None:
        assert res.bound <= res.objective + 1e-9
        assert res.incumbents == sorted(res.incumbents, reverse=True)
    for x in bb.accepted:
        assert verify(m, x, 1e-9, 1e-6).ok
    if res.status == "optimal":
        assert res.gap <= SolverConfig().gap_tol


def test_node_limit_without_incumbent():
    # the heuristic-free search needs more than one node to find any integer point
    m = MilpModel()
    x = [m.add_binary(f"x{i}") for i in range(6)]
    m.add_constraint("odd", {j: 2 for j in x}, "=", 7)  # no integer solution, fractional LP exists
    res = solve_mip(m, SolverConfig(node_limit=1))
    assert res.status == "limit-reached" and res.values is None


def test_node_limit_with_incumbent_reports_gap():
    m = random_milp(39)
    res = solve_mip(m, SolverConfig(node_limit=3))
    assert res.status in ("feasible-with-gap", "limit-reached", "optimal")
    if res.status == "feasible-with-gap":
        assert res.gap > SolverConfig().gap_tol and res.values is not None


def test_initial_point_seeds_incumbent():
    res = solve_mip(knapsack(), initial=[0.0, 1.0])
    assert res.incumbents[0] == pytest.approx(-4.0)
    assert res.objective == pytest.approx(-5.0)


def test_infeasible_initial_point_ignored():
    res = solve_mip(knapsack(), initial=[1.0, 1.0])
    assert res.objective == pytest.approx(-5.0)
    assert -10.0 not in res.incumbents


def test_progress_callback():
    seen = []
    solve_mip(random_milp(4), progress=seen.append)
    assert seen and {"nodes", "incumbent", "bound", "gap"} <= set(seen[-1])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_agrees_with_enumeration(seed):
    m = random_milp(seed, max_binaries=10, max_rows=12)
    res, ref = solve_mip(m), enumerate_exact(m)
    assert res.status == ref.status
    if ref.status == "optimal":
        assert res.objective == pytest.approx(ref.objective, rel=1e-6, abs=1e-9)
