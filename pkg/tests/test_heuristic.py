import pytest

from nnembed.heuristic import PlacementEvaluator, heuristic_points
from nnembed.model import build_model
from nnembed.solver.lp import solve_lp
from nnembed.solver.verify import verify


@pytest.mark.parametrize("variant", ["iot-only", "iot-pon", "pon-only", "optimal", "cloud"])
def test_points_pass_verify(reduced, catalog, variant):
    topo, req = reduced
    model, h = build_model(topo, req, variant, catalog, delta=0.05)
    points = heuristic_points(model, h, topo)
    assert points
    for x in points:
        rep = verify(model, x, 1e-9, 1e-9)
        assert rep.ok, rep.violations[:3]


def test_lp_guided_points(reduced, catalog):
    topo, req = reduced
    model, h = build_model(topo, req, "optimal", catalog)
    lp = solve_lp(model)
    points = heuristic_points(model, h, topo, lp_values=lp.values, packing=False)
    for x in points:
        assert verify(model, x, 1e-9, 1e-9).ok
        # a feasible integer point can never beat the relaxation
        assert model.objective_value(x) >= lp.objective - 1e-9


def test_evaluator_rejects_bad_placements(reduced, catalog):
    topo, req = reduced
    model, h = build_model(topo, req, "pon-only", catalog)
    ev = PlacementEvaluator(model, h, topo)
    assert not ev.feasible({v.id: "cloud-server0" for v in req.nodes})
    assert not ev.feasible({req.nodes[0].id: h.hosts[0]})
    # spread: a multi-layer restriction must use each of its layers
    assert not ev.feasible({v.id: "access-fog" for v in req.nodes})
    mixed = {v.id: "access-fog" for v in req.nodes}
    mixed[req.nodes[0].id] = "n0-gwfog"
    assert ev.feasible(mixed)


def test_extra_starts_used(reduced, catalog):
    topo, req = reduced
    model, h = build_model(topo, req, "pon-only", catalog)
    start = {v.id: "access-fog" for v in req.nodes}
    start[req.nodes[0].id] = "n0-gwfog"
    points = heuristic_points(model, h, topo, extra=[start], keep=1, packing=False)
    assert len(points) == 1 and verify(model, points[0], 1e-9, 1e-9).ok
