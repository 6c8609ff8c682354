"""Exhaustive embedding oracle for small instances.

Every assignment of virtual nodes to allowed hosts is enumerated and priced
directly with the catalog formulas; no MILP is involved. Routing is not
searched: the oracle only accepts topologies where each IoT network is a
complete Zigbee mesh with a single relay, which makes the shortest path
between two network nodes the one entering the fewest devices (every other
path enters a superset), and where the request's total traffic fits every
link, so capacities never bind. Under those conditions the cheapest embedding
of a placement routes every commodity along its shortest path.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import networkx as nx
import numpy as np

from nnembed.catalog import DeviceCatalog
from nnembed.errors import ModelError
from nnembed.experiments import solve_embedding
from nnembed.milp import MilpModel
from nnembed.request import NNRequest, RequestConfig, build_request
from nnembed.rng import SplitMix64
from nnembed.solver.enumerate import enumerate_exact
from nnembed.solver.mip import SolverConfig, solve_mip
from nnembed.topology import (
    PhysicalTopology,
    Restriction,
    TopologyConfig,
    build_topology,
    layer_of,
    processing_sites,
)

MAX_PLACEMENTS = 50_000_000
_CHUNK = 1 << 16


@dataclass
class OracleResult:
    objective: float
    placement: dict[str, str] | None
    feasible: int
    enumerated: int


def oracle_problems(
    topology: PhysicalTopology, request: NNRequest, catalog: DeviceCatalog | None = None
) -> list[str]:
    """Reasons the oracle's routing shortcut would be unsound here; empty when it applies."""
    problems = []
    g = topology.graph()
    by_net: dict[int, list[str]] = {}
    for n in topology.nodes:
        if n.role in ("iot-device", "relay"):
            by_net.setdefault(n.iot_network_index, []).append(n.id)
    for k, members in sorted(by_net.items()):
        relays = [m for m in members if topology.node(m).role == "relay"]
        if len(relays) != 1:
            problems.append(f"network {k} has {len(relays)} relays, the oracle needs exactly one")
        for a in members:
            for b in members:
                if a != b and not g.has_edge(a, b):
                    problems.append(f"network {k} is not a complete mesh ({a} to {b} missing)")
                    break
            else:
                continue
            break
    total = sum(k.traffic for k in request.commodities())
    tight = min(link.capacity for link in topology.links)
    if total > tight:
        problems.append(f"request traffic {total:g} kbps could saturate a {tight:g} kbps link")
    if catalog is not None:
        slowest = min(catalog.network[n.network_profile].bitrate_capacity for n in topology.network_nodes)
        if total > slowest:
            problems.append(f"request traffic {total:g} kbps could saturate a {slowest:g} kbps device")
    return problems


def enumerate_placements(
    topology: PhysicalTopology,
    request: NNRequest,
    restriction: Restriction | str,
    catalog: DeviceCatalog,
    delta: float | None = None,
    spread: bool = True,
) -> OracleResult:
    """Cheapest placement by brute force, priced with the catalog power formulas."""
    restriction = Restriction(restriction)
    problems = oracle_problems(topology, request, catalog)
    if problems:
        raise ModelError("oracle preconditions fail: " + "; ".join(problems))
    delta = catalog.delta if delta is None else delta
    hosts = processing_sites(topology, restriction)
    vnodes = list(request.nodes)
    count = len(hosts) ** len(vnodes)
    if count > MAX_PLACEMENTS:
        raise ModelError(f"oracle refused: {count} placements exceed {MAX_PLACEMENTS}")

    net_nodes = [n.id for n in topology.network_nodes]
    col = {n: i for i, n in enumerate(net_nodes)}
    g = topology.graph()
    host_node = [topology.attachment[p] for p in hosts]

    def ingress(src: str, dst: str) -> np.ndarray:
        v = np.zeros(len(net_nodes))
        if src != dst:
            for n in nx.shortest_path(g, src, dst)[1:]:
                v[col[n]] = 1.0
        return v

    # per commodity: table of entered devices indexed by (source, sink) choice
    vindex = {v.id: i for i, v in enumerate(vnodes)}
    tables = []
    for k in request.commodities():
        srcs = host_node if k.src[0] == "virtual" else [k.src[1]]
        dsts = host_node if k.dst[0] == "virtual" else [k.dst[1]]
        t = np.array([[ingress(s, d) * k.traffic for d in dsts] for s in srcs])
        si = vindex[k.src[1]] if k.src[0] == "virtual" else None
        di = vindex[k.dst[1]] if k.dst[0] == "virtual" else None
        tables.append((t, si, di))

    # device pricing
    idle_net = np.zeros(len(net_nodes))
    epb = np.zeros(len(net_nodes))
    iot_cpu_idle = np.zeros(len(net_nodes))
    is_iot = np.zeros(len(net_nodes), dtype=bool)
    for n in topology.network_nodes:
        prof = catalog.network[n.network_profile]
        i = col[n.id]
        share = delta if prof.delta_shared else 1.0
        idle_net[i] = share * prof.idle_power
        epb[i] = prof.energy_per_bit
        if n.role == "iot-device":
            is_iot[i] = True
            idle_net[i] = prof.idle_power
            iot_cpu_idle[i] = catalog.processing[n.processing_profile].idle_power
    procs = [catalog.processing[topology.node(p).processing_profile] for p in hosts]
    cap = np.array([p.capacity for p in procs])
    p_idle = np.array([p.idle_power for p in procs])
    p_slope = np.array([p.slope for p in procs])
    host_is_iot = np.array([topology.node(p).role == "iot-device" for p in hosts])
    host_col = np.array([col.get(p, -1) for p in hosts])
    demand = np.array([v.demand for v in vnodes])
    layers = restriction.layers
    need = spread and restriction is not Restriction.OPTIMAL and len(layers) > 1
    host_layer = [layer_of(topology.node(p)) for p in hosts]
    layer_masks = [np.array([hl == layer for hl in host_layer]) for layer in layers] if need else []

    H, V = len(hosts), len(vnodes)
    best = math.inf
    best_code = -1
    feasible = 0
    powers = H ** np.arange(V - 1, -1, -1, dtype=np.int64)
    for lo in range(0, count, _CHUNK):
        codes = np.arange(lo, min(count, lo + _CHUNK), dtype=np.int64)
        place = (codes[:, None] // powers[None, :]) % H  # [C, V] host index per node
        C = len(codes)
        load = np.zeros((C, H))
        for v in range(V):
            np.add.at(load, (np.arange(C), place[:, v]), demand[v])
        ok = np.all(load <= cap * (1 + 1e-12), axis=1)
        for mask in layer_masks:
            ok &= (load[:, mask] > 0).any(axis=1)
        if not ok.any():
            continue
        place, load, codes = place[ok], load[ok], codes[ok]
        C = len(codes)
        feasible += C
        thr = np.zeros((C, len(net_nodes)))
        for t, si, di in tables:
            s = place[:, si] if si is not None else np.zeros(C, dtype=np.int64)
            d = place[:, di] if di is not None else np.zeros(C, dtype=np.int64)
            thr += t[s, d]
        used = load > 0
        net_on = thr > 0
        # IoT devices pay one idle charge, the larger of CPU and radio, when doing anything
        iot_on = net_on.copy()
        iot_hosts = np.flatnonzero(host_is_iot)
        iot_on[:, host_col[iot_hosts]] |= used[:, iot_hosts]
        cost = thr @ epb
        cost += (net_on[:, ~is_iot] * idle_net[~is_iot]).sum(axis=1)
        cost += (iot_on[:, is_iot] * np.maximum(idle_net[is_iot], iot_cpu_idle[is_iot])).sum(axis=1)
        cost += load @ p_slope
        non_iot = ~host_is_iot
        cost += (used[:, non_iot] * p_idle[non_iot]).sum(axis=1)
        i = int(np.argmin(cost))
        if cost[i] < best:
            best = float(cost[i])
            best_code = int(codes[i])
    if best_code < 0:
        return OracleResult(math.inf, None, 0, count)
    digits = (best_code // powers) % H
    placement = {v.id: hosts[int(h)] for v, h in zip(vnodes, digits)}
    return OracleResult(best, placement, feasible, count)




def random_milp(seed: int, max_binaries: int = 25, max_rows: int = 40) -> MilpModel:
    """Seeded mixed model that is feasible by construction.

    Row right-hand sides are set around a hidden reference point, so at least
    that point satisfies every row; objective signs are mixed so optima are
    not trivially at zero.
    """
    rng = SplitMix64(seed)
    nb = 4 + rng.below(max_binaries - 3)
    nc = rng.below(7)
    rows = 3 + rng.below(max_rows - 2)
    m = MilpModel(f"random-{seed}")
    ref = []
    for i in range(nb):
        m.add_binary(f"b{i}", obj=round(rng.uniform(-10, 10), 3))
        ref.append(float(rng.below(2)))
    for j in range(nc):
        ub = round(rng.uniform(1, 10), 3)
        m.add_var(f"y{j}", 0.0, ub, obj=round(rng.uniform(-5, 5), 3))
        ref.append(rng.uniform(0, ub))
    n = nb + nc
    for r in range(rows):
        cols = rng.sample(range(n), min(n, 2 + rng.below(6)))
        coefs = {c: round(rng.uniform(-9, 9), 2) for c in cols}
        act = sum(coefs[c] * ref[c] for c in cols)
        kind = rng.below(10)
        if kind < 6:
            m.add_constraint(f"r{r}", coefs, "<=", round(act + rng.uniform(0, 3), 3))
        elif kind < 9:
            m.add_constraint(f"r{r}", coefs, ">=", round(act - rng.uniform(0, 3), 3))
        else:
            # equality slack absorbed by a dedicated continuous column
            s = m.add_var(f"s{r}", -5.0, 5.0)
            coefs[s] = 1.0
            m.add_constraint(f"r{r}", coefs, "=", round(act, 3))
    return m




# reduced instances: complete meshes so the routing shortcut above is exact
REDUCED_TOPOLOGY = {"devices_per_network": 8, "relays_per_network": 1, "zigbee_range": 200.0}
MAX_ORACLE_DEVICES = 8
ORACLE_VARIANTS = ("iot-only", "iot-pon", "pon-only", "optimal", "cloud")
ORACLE_DELTAS = (0.01, 0.05, 0.10)
ORACLE_DEMANDS = (0.2, 0.6, 1.0)
ORACLE_RTOL = 1e-6
ORACLE_GAP = 1e-9


@dataclass
class OracleCase:
    seed: int
    kind: str
    label: str
    pipeline: float
    oracle: float
    pipeline_status: str
    seconds: float

    @property
    def agrees(self) -> bool:
        if math.isinf(self.pipeline) or math.isinf(self.oracle):
            return self.pipeline == self.oracle
        return abs(self.pipeline - self.oracle) <= ORACLE_RTOL * max(1.0, abs(self.oracle))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "kind": self.kind,
            "instance": self.label,
            "pipeline_objective": self.pipeline,
            "oracle_objective": self.oracle,
            "pipeline_status": self.pipeline_status,
            "agrees": self.agrees,
            "seconds": self.seconds,
        }


def case_settings(seed: int) -> tuple[str, float, float]:
    """Variant, delta and demand rotated over the seed so cases cover the grid."""
    return (
        ORACLE_VARIANTS[seed % len(ORACLE_VARIANTS)],
        ORACLE_DELTAS[seed % len(ORACLE_DELTAS)],
        ORACLE_DEMANDS[(seed // len(ORACLE_DELTAS)) % len(ORACLE_DEMANDS)],
    )


def embedding_case(
    seed: int,
    topology_config: TopologyConfig,
    request_config: RequestConfig,
    catalog: DeviceCatalog,
) -> OracleCase:
    """Full pipeline against placement enumeration on one reduced instance."""
    if topology_config.devices_per_network > MAX_ORACLE_DEVICES:
        raise ModelError(
            f"oracle refused: {topology_config.devices_per_network} devices per network "
            f"exceed the cap of {MAX_ORACLE_DEVICES}"
        )
    start = time.perf_counter()
    variant, delta, demand = case_settings(seed)
    topo = build_topology(replace(topology_config, seed=seed), catalog)
    req = build_request(replace(request_config, seed=seed, demand_fraction=demand), topo)
    truth = enumerate_placements(topo, req, variant, catalog, delta)
    out = solve_embedding(topo, req, variant, catalog, delta, SolverConfig(gap_tol=ORACLE_GAP))
    found = out.result.objective if out.embedding is not None else math.inf
    if out.status == "infeasible":
        found = math.inf
    label = f"{variant} delta={delta:g} demand={demand:g}"
    return OracleCase(seed, "embedding", label, found, truth.objective, out.status, time.perf_counter() - start)


def milp_case(seed: int) -> OracleCase:
    start = time.perf_counter()
    model = random_milp(seed)
    found = solve_mip(model)
    truth = enumerate_exact(model)
    label = f"{len(model.integer_indices)} binaries, {model.num_constraints} rows"
    return OracleCase(seed, "milp", label, found.objective, truth.objective, found.status, time.perf_counter() - start)


__all__ = [
    "OracleResult",
    "OracleCase",
    "oracle_problems",
    "enumerate_placements",
    "random_milp",
    "embedding_case",
    "milp_case",
    "case_settings",
    "REDUCED_TOPOLOGY",
    "MAX_ORACLE_DEVICES",
]
