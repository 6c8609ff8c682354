from dataclasses import replace

import networkx as nx
import pytest

from nnembed.errors import ModelError
from nnembed.model import Embedding, embedding_power
from nnembed.oracle import (
    REDUCED_TOPOLOGY,
    OracleCase,
    case_settings,
    embedding_case,
    enumerate_placements,
    milp_case,
    oracle_problems,
    random_milp,
)
from nnembed.topology import build_topology


def test_preconditions_full_topology_refused(topology, request_, catalog):
    problems = oracle_problems(topology, request_, catalog)
    assert problems
    with pytest.raises(ModelError):
        enumerate_placements(topology, request_, "cloud", catalog)


def test_reduced_instance_accepted(reduced, catalog):
    topo, req = reduced
    assert oracle_problems(topo, req, catalog) == []


def test_embedding_case_cap(calibration, catalog):
    with pytest.raises(ModelError, match="cap"):
        embedding_case(1, calibration[0], calibration[1], catalog)


def test_cloud_enumeration_matches_hand_routing(reduced, catalog):
    # all five nodes on the only server; each anchor flow follows its shortest path
    topo, req = reduced
    truth = enumerate_placements(topo, req, "cloud", catalog, 0.01)
    assert truth.feasible and set(truth.placement.values()) == {"cloud-server0"}
    g = nx.DiGraph([(l.src, l.dst) for l in topo.links])
    ingress = {}
    for k in req.commodities():
        if k.src[0] == k.dst[0] == "virtual":
            continue
        a = k.src[1] if k.src[0] == "physical" else "cloud-switch"
        b = k.dst[1] if k.dst[0] == "physical" else "cloud-switch"
        for n in nx.shortest_path(g, a, b)[1:]:
            ingress[n] = ingress.get(n, 0.0) + k.traffic
    loads = {n: (0.0, t) for n, t in ingress.items()}
    loads["cloud-server0"] = (req.total_demand, 0.0)
    hand = embedding_power(Embedding(dict(truth.placement), {}, {}, loads), topo, catalog, 0.01)
    assert truth.objective == pytest.approx(hand.total, rel=1e-12)


def test_enumeration_frozen_value(catalog, calibration):
    # regression value for a seeded reduced instance (pon-only, delta 0.10, demand 0.2)
    case = embedding_case(2, replace(calibration[0], **REDUCED_TOPOLOGY), calibration[1], catalog)
    assert case.label == "pon-only delta=0.1 demand=0.2"
    assert case.oracle == pytest.approx(71.33786308333333, rel=1e-9)
    assert case.agrees and case.pipeline_status == "optimal"


def test_case_settings_cover_grid():
    seen = {case_settings(s) for s in range(1, 46)}
    assert len(seen) == 45
    assert {v for v, _, _ in seen} == {"iot-only", "iot-pon", "pon-only", "optimal", "cloud"}


def test_random_milp_deterministic_and_sized():
    for seed in range(30):
        a, b = random_milp(seed), random_milp(seed)
        assert a.to_lp() == b.to_lp()
        assert len(a.integer_indices) <= 25 and a.num_constraints <= 40
    assert random_milp(1).to_lp() != random_milp(2).to_lp()


def test_random_milp_respects_limits():
    m = random_milp(5, max_binaries=6, max_rows=8)
    assert len(m.integer_indices) <= 6 and m.num_constraints <= 8


def test_milp_case_frozen():
    case = milp_case(7)
    assert case.label == "17 binaries, 19 rows"
    assert case.oracle == pytest.approx(-22.53373852278873, rel=1e-12)
    assert case.agrees


def test_agreement_rule():
    base = dict(seed=0, kind="milp", label="", pipeline_status="optimal", seconds=0.0)
    assert OracleCase(pipeline=100.0, oracle=100.00005, **base).agrees
    assert not OracleCase(pipeline=100.0, oracle=100.001, **base).agrees
    assert OracleCase(pipeline=float("inf"), oracle=float("inf"), **base).agrees
    assert not OracleCase(pipeline=1.0, oracle=float("inf"), **base).agrees
