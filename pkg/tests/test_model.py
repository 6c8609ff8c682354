from collections import Counter

import numpy as np
import pytest

from nnembed.errors import CapacityError, DecodingError, InfeasibleError, ModelError
from nnembed.experiments import solve_embedding
from nnembed.milp import MilpModel
from nnembed.model import Embedding, build_model, decode, embedding_power
from nnembed.request import RequestConfig, build_request
from nnembed.solver.mip import SolverConfig
from nnembed.topology import Restriction, processing_sites

GAP = SolverConfig(gap_tol=0.01)


def test_construction_counts(topology, request_, catalog):
    model, h = build_model(topology, request_, "cloud", catalog, delta=0.01)
    assert len(h.commodities) == 9
    assign = [c for c in model.constraints if c.name.startswith("assign[")]
    assert len(assign) == 5
    assert len(h.placement) == 5
    assert {p for _, p in h.placement} == {"cloud-server0"}


def test_handles_are_injective_and_total(topology, request_, catalog):
    model, h = build_model(topology, request_, "iot-pon", catalog, delta=0.05)
    idx = h.all_indices()
    assert len(idx) == len(set(idx)) == model.num_vars


def test_names_unique_and_binaries(topology, request_, catalog):
    model, _ = build_model(topology, request_, "optimal", catalog)
    names = [v.name for v in model.variables]
    assert len(names) == len(set(names))
    for v in model.variables:
        if v.integral:
            assert (v.lb, v.ub) == (0.0, 1.0)
        assert np.isfinite(v.obj)


def test_allowed_hosts_follow_restriction(topology, request_, catalog):
    for r in Restriction:
        _, h = build_model(topology, request_, r, catalog)
        assert set(h.hosts) == set(processing_sites(topology, r))
        assert {p for _, p in h.placement} == set(h.hosts)


def test_traffic_scaling_scales_network_terms_only(topology, calibration, catalog):
    base = build_request(calibration[1], topology)
    twice = build_request(RequestConfig(**{**calibration[1].to_dict(), "traffic": 50.0}), topology)
    m1, h1 = build_model(topology, base, "optimal", catalog, tighten=False)
    m2, h2 = build_model(topology, twice, "optimal", catalog, tighten=False)
    assert [v.name for v in m1.variables] == [v.name for v in m2.variables]
    c1, c2 = m1.arrays().c, m2.arrays().c
    for col in h1.placement.values():
        assert c1[col] == c2[col]
    for name in ("assign", "cap"):
        rows1 = [c for c in m1.constraints if c.name.startswith(name + "[")]
        rows2 = [c for c in m2.constraints if c.name.startswith(name + "[")]
        assert rows1 == rows2
    # conservation right-hand sides carry T_k, so they double
    flow1 = {c.name: c for c in m1.constraints if c.name.startswith("flow[")}
    flow2 = {c.name: c for c in m2.constraints if c.name.startswith("flow[")}
    assert flow1.keys() == flow2.keys()
    for name, con in flow1.items():
        assert flow2[name].rhs == pytest.approx(2 * con.rhs)


def test_empty_site_set_is_model_error(catalog, reduced):
    topo, req = reduced
    from dataclasses import replace

    no_cloud = replace(topo, nodes=tuple(n for n in topo.nodes if n.role != "cloud-server"))
    with pytest.raises(ModelError):
        build_model(no_cloud, req, "cloud", catalog)


def test_capacity_audit(topology, calibration, catalog):
    heavy = build_request(RequestConfig(**{**calibration[1].to_dict(), "demand_fraction": 3.0}), topology)
    with pytest.raises(InfeasibleError, match="largest allowed host"):
        build_model(topology, heavy, "iot-only", catalog)


def test_cloud_decode_paths(topology, request_, catalog):
    out = solve_embedding(topology, request_, "cloud", catalog, 0.01, GAP)
    assert out.status == "optimal"
    emb = out.embedding
    assert set(emb.placement.values()) == {"cloud-server0"}
    tail = ["n0-onu", "olt", "metro", "cloud-router", "cloud-switch"]
    for k in out.handles.commodities:
        paths = emb.paths[k.name]
        if k.src[0] == "virtual" and k.dst[0] == "virtual":
            assert paths == []  # co-located, zero net supply
            continue
        assert len(paths) == 1 and paths[0][1] == pytest.approx(k.traffic)
        nodes = paths[0][0]
        if k.src[0] == "physical":
            net = k.src[1].split("-")[0]
            assert nodes[0] == k.src[1] and nodes[-5:] == [f"{net}-onu"] + tail[1:]
            assert f"{net}-ap" in nodes
        else:
            assert nodes[-1] == k.dst[1] and nodes[:5] == tail[::-1]
    assert emb.power.total == pytest.approx(emb.objective, rel=1e-6)


def test_iot_only_olt_carries_inter_network_traffic(topology, request_, catalog):
    out = solve_embedding(topology, request_, "iot-only", catalog, 0.01, GAP)
    emb = out.embedding
    net_of = {n.id: n.iot_network_index for n in topology.nodes}

    def network(end):
        node = emb.placement[end[1]] if end[0] == "virtual" else end[1]
        return net_of[node]

    crossing = sum(k.traffic for k in out.handles.commodities if network(k.src) != network(k.dst))
    assert emb.device_loads.get("olt", (0.0, 0.0))[1] == pytest.approx(crossing)


def test_pon_only_full_demand_respects_gateway_capacity(topology, calibration, catalog):
    req = build_request(RequestConfig(**{**calibration[1].to_dict(), "demand_fraction": 1.0}), topology)
    out = solve_embedding(topology, req, "pon-only", catalog, 0.01, GAP)
    assert out.status in ("optimal", "feasible-with-gap")
    per_host = Counter(out.embedding.placement.values())
    for host, count in per_host.items():
        if host.endswith("-gwfog"):
            assert count <= 2
    assert len(per_host) >= 2  # 5000 MIPS fits on no single 2400 MIPS fog


def test_single_site_anchor_flows_zero(catalog, reduced):
    # every endpoint on one host: hosts on the cloud, anchors replaced by virtual chain
    topo, _ = reduced
    req = build_request(RequestConfig(layer_sizes=(1, 1, 1), traffic=25.0), topo)
    out = solve_embedding(topo, req, "cloud", catalog, 0.01, GAP)
    for k in out.handles.commodities:
        if k.src[0] == "virtual" and k.dst[0] == "virtual":
            assert out.embedding.paths[k.name] == []


def test_decode_refuses_infeasible(topology, request_, catalog):
    model, h = build_model(topology, request_, "cloud", catalog)
    with pytest.raises(DecodingError, match="infeasible"):
        decode(model, h, np.zeros(model.num_vars), topology, catalog)


def test_embedding_power_examples(catalog, topology):
    empty = Embedding({}, {}, {}, {})
    assert embedding_power(empty, topology, catalog).total == 0.0
    rpi = Embedding({"in0": "n0-iot0"}, {}, {}, {"n0-iot0": (1000.0, 0.0)})
    assert embedding_power(rpi, topology, catalog).total == pytest.approx(3.96, rel=1e-9)
    cloud = Embedding({"in0": "cloud-server0"}, {}, {}, {"cloud-server0": (1000.0, 0.0)})
    watts = embedding_power(cloud, topology, catalog).total
    assert watts == pytest.approx(78 + (130 - 78) / 108000 * 1000, rel=1e-9)
    assert watts == pytest.approx(78.48, abs=5e-3)


def test_embedding_power_capacity_errors(catalog, topology):
    with pytest.raises(CapacityError):
        embedding_power(Embedding({}, {}, {}, {"olt": (10.0, 0.0)}), topology, catalog)
    with pytest.raises(CapacityError):
        embedding_power(Embedding({}, {}, {}, {"cloud-server0": (0.0, 5.0)}), topology, catalog)


def test_embedding_json(topology, request_, catalog):
    import json

    out = solve_embedding(topology, request_, "cloud", catalog, 0.01, GAP)
    doc = json.loads(out.embedding.to_json())
    assert doc["placement"]["in0"] == "cloud-server0"
    assert doc["power"]["total_w"] == pytest.approx(out.embedding.power.total)


def test_lp_export_round_trip(reduced, catalog):
    topo, req = reduced
    model, _ = build_model(topo, req, "pon-only", catalog)
    back = MilpModel.from_lp(model.to_lp())
    assert back.num_vars == model.num_vars and back.num_constraints == model.num_constraints
    np.testing.assert_allclose(back.arrays().c, model.arrays().c)
