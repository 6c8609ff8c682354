"""MILP formulation of NN-request embedding and decoding of its solutions.

Variable classes
    x[v,p]   binary, virtual node v hosted on processing node p
    a[p]     binary, processing node p switched on
    f[k,l]   continuous, kbps of commodity k on directed link l
    thr[n]   continuous, ingress kbps at network node n
    b[n]     binary, network node n switched on
    u[p]     binary, IoT device p switched on (one idle charge for CPU and radio)

Constraint families are named after the quantity they bound, e.g.
``assign[in0]`` or ``flow[in0->hid0,olt]``. Two families strengthen the
linear relaxation without changing the optimal value: processing capacity is
written against ``a[p]`` and every commodity's ingress at a node is limited by
``T_k * b[n]`` (``route``).
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import networkx as nx
import numpy as np

from nnembed.catalog import DeviceCatalog, idle_share, network_power, processing_power
from nnembed.errors import CapacityError, DecodingError, InfeasibleError, ModelError
from nnembed.milp import MilpModel
from nnembed.request import Commodity, NNRequest
from nnembed.topology import (
    PhysicalTopology,
    Restriction,
    layer_of,
    processing_sites,
)

FLOW_TOL = 1e-7  # kbps below which a flow or throughput counts as zero
OBJ_RTOL = 1e-6

__all__ = [
    "Restriction",
    "HandleMap",
    "Embedding",
    "PowerBreakdown",
    "build_model",
    "polish",
    "decode",
    "embedding_power",
]


@dataclass
class HandleMap:
    placement: dict[tuple[str, str], int] = field(default_factory=dict)
    flow: dict[tuple[str, tuple[str, str]], int] = field(default_factory=dict)
    proc_active: dict[str, int] = field(default_factory=dict)
    net_active: dict[str, int] = field(default_factory=dict)
    throughput: dict[str, int] = field(default_factory=dict)
    iot_active: dict[str, int] = field(default_factory=dict)
    colocated: dict[tuple[str, str], int] = field(default_factory=dict)
    commodities: list[Commodity] = field(default_factory=list)
    hosts: list[str] = field(default_factory=list)
    demand: dict[str, float] = field(default_factory=dict)
    restriction: Restriction = Restriction.OPTIMAL
    delta: float = 0.01
    spread_layers: tuple[str, ...] = ()

    def all_indices(self) -> list[int]:
        out: list[int] = []
        for table in (
            self.placement,
            self.flow,
            self.proc_active,
            self.net_active,
            self.throughput,
            self.iot_active,
            self.colocated,
        ):
            out.extend(table.values())
        return out


@dataclass
class PowerBreakdown:
    devices: dict[str, float]
    processing: float
    network: float

    @property
    def total(self) -> float:
        return self.processing + self.network

    def to_dict(self) -> dict[str, Any]:
        return {
            "total_w": self.total,
            "processing_w": self.processing,
            "network_w": self.network,
            "devices_w": dict(self.devices),
        }


@dataclass
class Embedding:
    placement: dict[str, str]
    flows: dict[str, list[tuple[tuple[str, str], float]]]
    paths: dict[str, list[tuple[list[str], float]]]
    device_loads: dict[str, tuple[float, float]]
    power: PowerBreakdown | None = None
    pruned_cycles: dict[str, float] = field(default_factory=dict)
    objective: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "placement": dict(self.placement),
            "paths": {
                k: [{"nodes": nodes, "kbps": kbps} for nodes, kbps in v] for k, v in self.paths.items()
            },
            "device_loads": {n: {"mips": m, "kbps": t} for n, (m, t) in self.device_loads.items()},
            "power": self.power.to_dict() if self.power else None,
            "pruned_cycles": dict(self.pruned_cycles),
            "objective": self.objective,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _in_out_links(topology: PhysicalTopology):
    inbound: dict[str, list[tuple[str, str]]] = defaultdict(list)
    outbound: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for link in topology.links:
        inbound[link.dst].append((link.src, link.dst))
        outbound[link.src].append((link.src, link.dst))
    return inbound, outbound


def capacity_audit(topology: PhysicalTopology, request: NNRequest, hosts: Sequence[str], catalog: DeviceCatalog) -> str | None:
    """Message explaining why placement is impossible, or None."""
    caps = {p: catalog.processing[topology.node(p).processing_profile].capacity for p in hosts}
    total = request.total_demand
    available = sum(caps.values())
    if total > available * (1 + 1e-12):
        return (
            f"total demand {total:g} MIPS exceeds the {available:g} MIPS available on "
            f"{len(hosts)} allowed hosts"
        )
    biggest = max(caps.values())
    for v in request.nodes:
        if v.demand > biggest * (1 + 1e-12):
            return f"virtual node {v.id} needs {v.demand:g} MIPS but the largest allowed host offers {biggest:g}"
    return None


def build_model(
    topology: PhysicalTopology,
    request: NNRequest,
    restriction: Restriction | str,
    catalog: DeviceCatalog,
    delta: float | None = None,
    spread: bool = True,
    tighten: bool = True,
) -> tuple[MilpModel, HandleMap]:
    """MILP for embedding ``request`` under ``restriction``.

    ``spread`` forces a multi-layer restriction to use each of its layers at
    least once; single-layer restrictions and ``optimal`` are unaffected.
    ``tighten`` adds valid inequalities that cut off fractional points only
    (see :func:`_add_tightening`); the integer optimum is the same either way.
    """
    restriction = Restriction(restriction)
    if delta is not None:
        catalog = catalog.with_delta(delta)
    delta = catalog.delta
    hosts = processing_sites(topology, restriction)
    if not hosts:
        raise ModelError(f"restriction {restriction.value} allows no processing site in this topology")
    problem = capacity_audit(topology, request, hosts, catalog)
    if problem:
        raise InfeasibleError(f"capacity audit failed for {restriction.value}: {problem}")

    m = MilpModel(f"embed-{restriction.value}")
    h = HandleMap(restriction=restriction, delta=delta, hosts=list(hosts))
    commodities = request.commodities()
    h.commodities = commodities
    inbound, outbound = _in_out_links(topology)
    net_nodes = topology.network_nodes
    demand = {v.id: v.demand for v in request.nodes}
    h.demand = dict(demand)

    proc = {p: catalog.processing[topology.node(p).processing_profile] for p in hosts}
    for v in request.nodes:
        for p in hosts:
            h.placement[(v.id, p)] = m.add_binary(f"x[{v.id},{p}]", obj=proc[p].slope * v.demand)
    for p in hosts:
        is_iot = topology.node(p).role == "iot-device"
        h.proc_active[p] = m.add_binary(f"a[{p}]", obj=0.0 if is_iot else proc[p].idle_power)

    link_cap = {(l.src, l.dst): l.capacity for l in topology.links}
    for k in commodities:
        for link, cap in link_cap.items():
            h.flow[(k.name, link)] = m.add_var(f"f[{k.name},{link[0]}>{link[1]}]", 0.0, min(cap, k.traffic))

    for n in net_nodes:
        prof = catalog.network[n.network_profile]
        h.throughput[n.id] = m.add_var(f"thr[{n.id}]", 0.0, prof.bitrate_capacity, obj=prof.energy_per_bit)
    for n in net_nodes:
        prof = catalog.network[n.network_profile]
        is_iot = n.role == "iot-device"
        charge = 0.0 if is_iot else idle_share(prof, delta) * prof.idle_power
        h.net_active[n.id] = m.add_binary(f"b[{n.id}]", obj=charge)
    for n in net_nodes:
        if n.role == "iot-device":
            idle = catalog.network[n.network_profile].idle_power
            if n.processing_profile is not None:
                idle = max(idle, catalog.processing[n.processing_profile].idle_power)
            h.iot_active[n.id] = m.add_binary(f"u[{n.id}]", obj=idle)

    # (C1) each virtual node on exactly one allowed host
    for v in request.nodes:
        m.add_constraint(f"assign[{v.id}]", [(h.placement[(v.id, p)], 1.0) for p in hosts], "=", 1.0)

    # (C2) processing capacity, against the activation binary
    for p in hosts:
        terms = [(h.placement[(v.id, p)], demand[v.id]) for v in request.nodes]
        terms.append((h.proc_active[p], -proc[p].capacity))
        m.add_constraint(f"proc_cap[{p}]", terms, "<=", 0.0)

    # (C3) flow conservation: out - in = T * (supply at source - supply at sink)
    hosts_at: dict[str, list[str]] = defaultdict(list)
    for p in hosts:
        hosts_at[topology.attachment[p]].append(p)
    for k in commodities:
        for n in net_nodes:
            terms = [(h.flow[(k.name, l)], 1.0) for l in outbound[n.id]]
            terms += [(h.flow[(k.name, l)], -1.0) for l in inbound[n.id]]
            rhs = 0.0
            for sign, (kind, end) in ((1.0, k.src), (-1.0, k.dst)):
                if kind == "physical":
                    if end == n.id:
                        rhs += sign * k.traffic
                else:
                    terms += [(h.placement[(end, p)], -sign * k.traffic) for p in hosts_at.get(n.id, ())]
            m.add_constraint(f"flow[{k.name},{n.id}]", terms, "=", rhs)

    # (C4) link capacity
    for link, cap in link_cap.items():
        terms = [(h.flow[(k.name, link)], 1.0) for k in commodities]
        m.add_constraint(f"link_cap[{link[0]}>{link[1]}]", terms, "<=", cap)

    # (C5) ingress throughput and its activation
    for n in net_nodes:
        terms = [(h.throughput[n.id], 1.0)]
        terms += [(h.flow[(k.name, l)], -1.0) for k in commodities for l in inbound[n.id]]
        m.add_constraint(f"thr_def[{n.id}]", terms, "=", 0.0)
        cap = catalog.network[n.network_profile].bitrate_capacity
        m.add_constraint(f"thr_cap[{n.id}]", [(h.throughput[n.id], 1.0), (h.net_active[n.id], -cap)], "<=", 0.0)

    # (C6) a host is on when anything is placed on it
    for v in request.nodes:
        for p in hosts:
            m.add_constraint(f"act[{v.id},{p}]", [(h.proc_active[p], 1.0), (h.placement[(v.id, p)], -1.0)], ">=", 0.0)

    # (C7) IoT devices pay a single idle charge for CPU and radio
    for p, col in h.iot_active.items():
        if p in h.proc_active:
            m.add_constraint(f"iot_cpu[{p}]", [(col, 1.0), (h.proc_active[p], -1.0)], ">=", 0.0)
        m.add_constraint(f"iot_net[{p}]", [(col, 1.0), (h.net_active[p], -1.0)], ">=", 0.0)

    # per-commodity ingress only through switched-on devices
    for k in commodities:
        for n in net_nodes:
            if not inbound[n.id]:
                continue
            terms = [(h.flow[(k.name, l)], 1.0) for l in inbound[n.id]]
            terms.append((h.net_active[n.id], -k.traffic))
            m.add_constraint(f"route[{k.name},{n.id}]", terms, "<=", 0.0)

    # processing forced onto every layer of a multi-layer restriction
    layers = restriction.layers
    if spread and restriction is not Restriction.OPTIMAL and len(layers) > 1:
        h.spread_layers = tuple(layers)
        for layer in layers:
            cols = [
                h.placement[(v.id, p)]
                for v in request.nodes
                for p in hosts
                if layer_of(topology.node(p)) == layer
            ]
            if not cols:
                raise ModelError(f"restriction {restriction.value} has no host in layer {layer}")
            m.add_constraint(f"spread[{layer}]", [(c, 1.0) for c in cols], ">=", 1.0)
        if len(layers) > len(request.nodes):
            raise InfeasibleError(
                f"{restriction.value} must use {len(layers)} layers but the request has {len(request.nodes)} nodes"
            )
    if tighten:
        _add_tightening(m, h, topology, request, proc, inbound, hosts_at, spread)
    return m, h


def _add_tightening(m, h, topology, request, proc, inbound, hosts_at, spread) -> None:
    """Valid inequalities that only remove fractional points.

    ``card[p]``: a host holds at most the number of virtual nodes that fit in
    its capacity, counted with the smallest demands first.
    ``min_hosts``: at least as many hosts work as the largest fit counts need
    to hold every virtual node.
    ``spread_on[layer]``: a layer that must receive processing has a working host.
    ``apart[k,n]``: when the two ends of a virtual link can never share a
    host at network node ``n``, a sink placed there receives the full rate.
    ``forced_on[n]``: a device that every route from some sensor to some
    actuator must enter is switched on, wherever the neurons sit.
    ``co[k,n]`` with ``coloc*`` rows: a continuous indicator that both ends
    of virtual link k sit at network node n; the sink's node receives the
    link's rate unless it is co-located, and co-location is budgeted by
    how many links any capacity-respecting grouping can keep local.
    """
    demands = sorted(v.demand for v in request.nodes)
    fits = []
    for p in h.hosts:
        fit, used = 0, 0.0
        for d in demands:
            if used + d > proc[p].capacity * (1 + 1e-12):
                break
            used += d
            fit += 1
        fits.append(fit)
        if fit < len(demands):
            terms = [(h.placement[(v.id, p)], 1.0) for v in request.nodes]
            terms.append((h.proc_active[p], -float(fit)))
            m.add_constraint(f"card[{p}]", terms, "<=", 0.0)
    need, held = 0, 0
    for fit in sorted(fits, reverse=True):
        if held >= len(demands):
            break
        held += fit
        need += 1
    if need > 1:
        m.add_constraint("min_hosts", [(h.proc_active[p], 1.0) for p in h.hosts], ">=", float(need))

    layers = h.restriction.layers
    if spread and h.restriction is not Restriction.OPTIMAL and len(layers) > 1:
        for layer in layers:
            cols = [h.proc_active[p] for p in h.hosts if layer_of(topology.node(p)) == layer]
            m.add_constraint(f"spread_on[{layer}]", [(c, 1.0) for c in cols], ">=", 1.0)

    demand = h.demand
    for k in h.commodities:
        if k.src[0] != "virtual" or k.dst[0] != "virtual":
            continue
        s, d = k.src[1], k.dst[1]
        for n, ps in hosts_at.items():
            if len(ps) != 1 or demand[s] + demand[d] <= proc[ps[0]].capacity * (1 + 1e-12):
                continue
            terms = [(h.flow[(k.name, l)], 1.0) for l in inbound[n]]
            terms.append((h.placement[(d, ps[0])], -k.traffic))
            m.add_constraint(f"apart[{k.name},{n}]", terms, ">=", 0.0)

    for n in sorted(_forced_devices(topology, request)):
        m.add_constraint(f"forced_on[{n}]", [(h.net_active[n], 1.0)], ">=", 1.0)

    _add_colocation(m, h, request, proc, inbound, hosts_at, fits)


def _add_colocation(m, h, request, proc, inbound, hosts_at, fits) -> None:
    fit_of = dict(zip(h.hosts, fits))
    group = {n: min(sum(fit_of[p] for p in ps), len(request.nodes)) for n, ps in hosts_at.items()}
    vlinks = [k for k in h.commodities if k.src[0] == "virtual" and k.dst[0] == "virtual"]
    if not vlinks or max(group.values(), default=0) < 2:
        return
    pairs = [(k.src[1], k.dst[1]) for k in vlinks]
    names = [v.id for v in request.nodes]
    if len(names) > 10:
        return  # the budgets below are exact enumerations
    local = {g: _densest(names, pairs, g) for g in set(group.values())}
    budget = _best_grouping(names, pairs, max(group.values()))
    every = []
    for n in sorted(hosts_at):
        ps = hosts_at[n]
        if group[n] < 2:
            continue
        cap = max(proc[p].capacity for p in ps) * (1 + 1e-12)
        here = []
        for k in vlinks:
            s, d = k.src[1], k.dst[1]
            if sum(proc[p].capacity for p in ps) * (1 + 1e-12) < h.demand[s] + h.demand[d]:
                continue
            if len(ps) == 1 and h.demand[s] + h.demand[d] > cap:
                continue
            col = m.add_var(f"co[{k.name},{n}]", 0.0, 1.0)
            h.colocated[(k.name, n)] = col
            here.append(col)
            xs = [(h.placement[(s, p)], -1.0) for p in ps]
            xd = [(h.placement[(d, p)], -1.0) for p in ps]
            m.add_constraint(f"co_src[{k.name},{n}]", [(col, 1.0)] + xs, "<=", 0.0)
            m.add_constraint(f"co_dst[{k.name},{n}]", [(col, 1.0)] + xd, "<=", 0.0)
            terms = [(h.flow[(k.name, l)], 1.0) for l in inbound[n]]
            terms += [(c, k.traffic * w) for c, w in xd]
            terms.append((col, k.traffic))
            m.add_constraint(f"co_in[{k.name},{n}]", terms, ">=", 0.0)
        if here and local[group[n]] < len(here):
            m.add_constraint(f"coloc_at[{n}]", [(c, 1.0) for c in here], "<=", float(local[group[n]]))
        every += here
    if every and budget < len(vlinks):
        m.add_constraint("coloc_total", [(c, 1.0) for c in every], "<=", float(budget))


def _densest(names, pairs, size: int) -> int:
    """Most virtual links inside any set of at most ``size`` virtual nodes."""
    best = 0
    for r in range(2, min(size, len(names)) + 1):
        for subset in itertools.combinations(names, r):
            chosen = set(subset)
            best = max(best, sum(s in chosen and d in chosen for s, d in pairs))
    return best


def _best_grouping(names, pairs, size: int) -> int:
    """Most virtual links kept inside blocks of a partition with blocks of at most ``size``."""
    best = 0

    def extend(i: int, blocks: list[list[str]]) -> None:
        nonlocal best
        if i == len(names):
            where = {v: b for b, block in enumerate(blocks) for v in block}
            best = max(best, sum(where[s] == where[d] for s, d in pairs))
            return
        for block in blocks:
            if len(block) < size:
                block.append(names[i])
                extend(i + 1, blocks)
                block.pop()
        blocks.append([names[i]])
        extend(i + 1, blocks)
        blocks.pop()

    extend(0, [])
    return best


def _forced_devices(topology: PhysicalTopology, request: NNRequest) -> set[str]:
    """Network nodes with ingress in every embedding of the request.

    Traffic from a sensor anchor reaches an actuator anchor through the
    neurons' hosts whenever the virtual graph links the input to the output,
    so every node separating the two anchors (and the actuator itself) must
    receive data.
    """
    succ: dict[str, set[str]] = defaultdict(set)
    for l in request.links:
        succ[l.src].add(l.dst)

    def reaches(a: str, b: str) -> bool:
        seen, stack = {a}, [a]
        while stack:
            for nxt in succ[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return b in seen

    g = topology.graph()
    forced: set[str] = set()
    sources = [a for a in request.anchors if a.kind == "source"]
    sinks = [a for a in request.anchors if a.kind == "sink"]
    for s in sources:
        for t in sinks:
            if s.physical == t.physical or not reaches(s.virtual, t.virtual):
                continue
            forced.add(t.physical)
            for n in g.nodes:
                if n in (s.physical, t.physical) or n in forced:
                    continue
                rest = g.subgraph([v for v in g.nodes if v != n])
                if not nx.has_path(rest, s.physical, t.physical):
                    forced.add(n)
    return forced


# --------------------------------------------------------------------------
# decoding


def _endpoint_node(end: tuple[str, str], placement: Mapping[str, str], topology: PhysicalTopology) -> str:
    kind, name = end
    return name if kind == "physical" else topology.attachment[placement[name]]


def _decompose(flows: dict[tuple[str, str], float], src: str, dst: str):
    """Split a single-commodity flow into src->dst paths plus leftover cycles."""
    remaining = {l: v for l, v in flows.items() if v > FLOW_TOL}
    paths = []
    while True:
        out = defaultdict(list)
        for (a, b), v in remaining.items():
            out[a].append(b)
        for a in out:
            out[a].sort()
        if src == dst:
            break
        # depth-first search for any src->dst path over positive flow
        stack, parent = [src], {src: None}
        while stack and dst not in parent:
            node = stack.pop()
            for nxt in out.get(node, ()):
                if nxt not in parent:
                    parent[nxt] = node
                    stack.append(nxt)
        if dst not in parent:
            break
        nodes = [dst]
        while parent[nodes[-1]] is not None:
            nodes.append(parent[nodes[-1]])
        nodes.reverse()
        edges = list(zip(nodes, nodes[1:]))
        amount = min(remaining[e] for e in edges)
        for e in edges:
            remaining[e] -= amount
            if remaining[e] <= FLOW_TOL:
                del remaining[e]
        paths.append((nodes, amount))
    return paths, remaining


def polish(model: MilpModel, handles: HandleMap, values, topology: PhysicalTopology) -> np.ndarray:
    """Canonical point with the same placement and routing but no waste.

    Flow cycles are cancelled, throughputs recomputed, and every activation
    binary is set to the smallest value its loads allow. The result is never
    worse than the input.
    """
    x = np.array(values, dtype=float)
    placement = _read_placement(handles, x)
    for col in handles.placement.values():
        x[col] = 0.0
    for v, p in placement.items():
        x[handles.placement[(v, p)]] = 1.0
    ingress: dict[str, float] = defaultdict(float)
    for k in handles.commodities:
        flows = {l: x[col] for (name, l), col in handles.flow.items() if name == k.name}
        src = _endpoint_node(k.src, placement, topology)
        dst = _endpoint_node(k.dst, placement, topology)
        paths, _ = _decompose(flows, src, dst)
        for l in flows:
            x[handles.flow[(k.name, l)]] = 0.0
        carried = sum(a for _, a in paths)
        scale = k.traffic / carried if carried > 0 and src != dst else 0.0
        for nodes, amount in paths:
            for e in zip(nodes, nodes[1:]):
                x[handles.flow[(k.name, e)]] += amount * scale
                ingress[e[1]] += amount * scale
    for n, col in handles.throughput.items():
        x[col] = ingress.get(n, 0.0)
    for n, col in handles.net_active.items():
        x[col] = 1.0 if ingress.get(n, 0.0) > FLOW_TOL else 0.0
    used = set(placement.values())
    for p, col in handles.proc_active.items():
        x[col] = 1.0 if p in used else 0.0
    for p, col in handles.iot_active.items():
        on = x[handles.net_active[p]] > 0.5 or (p in handles.proc_active and x[handles.proc_active[p]] > 0.5)
        x[col] = 1.0 if on else 0.0
    for (name, n), col in handles.colocated.items():
        k = next(c for c in handles.commodities if c.name == name)
        both = topology.attachment[placement[k.src[1]]] == n == topology.attachment[placement[k.dst[1]]]
        x[col] = 1.0 if both else 0.0
    return x


def _read_placement(handles: HandleMap, values) -> dict[str, str]:
    placement = {}
    for (v, p), col in handles.placement.items():
        if values[col] > 0.5:
            if v in placement:
                raise DecodingError(f"virtual node {v} placed twice")
            placement[v] = p
    return placement


def decode(
    model: MilpModel,
    handles: HandleMap,
    values,
    topology: PhysicalTopology,
    catalog: DeviceCatalog,
    tolerance: float = 1e-6,
) -> Embedding:
    from nnembed.solver.verify import verify

    report = verify(model, values, tolerance)
    if report.violations:
        raise DecodingError("refusing to decode an infeasible point: " + "; ".join(report.violations[:5]))
    x = np.asarray(values, dtype=float)
    placement = _read_placement(handles, x)
    missing = {n for (n, _) in handles.placement} - set(placement)
    if missing:
        raise DecodingError(f"virtual nodes without host: {sorted(missing)}")

    flows: dict[str, list[tuple[tuple[str, str], float]]] = {}
    paths: dict[str, list[tuple[list[str], float]]] = {}
    cycles: dict[str, float] = {}
    ingress: dict[str, float] = defaultdict(float)
    for k in handles.commodities:
        raw = {l: float(x[col]) for (name, l), col in handles.flow.items() if name == k.name}
        src = _endpoint_node(k.src, placement, topology)
        dst = _endpoint_node(k.dst, placement, topology)
        found, leftover = _decompose(raw, src, dst)
        flows[k.name] = [(l, v) for l, v in raw.items() if v > FLOW_TOL]
        paths[k.name] = found
        if leftover:
            cycles[k.name] = sum(leftover.values())
        carried = sum(a for _, a in found)
        if src != dst and not math.isclose(carried, k.traffic, rel_tol=1e-6, abs_tol=1e-6):
            raise DecodingError(f"commodity {k.name} carries {carried} kbps, expected {k.traffic}")
        for nodes, amount in found:
            for node in nodes[1:]:
                ingress[node] += amount

    mips: dict[str, float] = defaultdict(float)
    for v, p in placement.items():
        mips[p] += handles.demand[v]

    loads: dict[str, tuple[float, float]] = {}
    for n in topology.nodes:
        m_load = mips.get(n.id, 0.0)
        t_load = ingress.get(n.id, 0.0)
        if m_load > 0 or t_load > FLOW_TOL:
            loads[n.id] = (m_load, t_load if t_load > FLOW_TOL else 0.0)

    emb = Embedding(placement=placement, flows=flows, paths=paths, device_loads=loads, pruned_cycles=cycles)
    emb.power = embedding_power(emb, topology, catalog, handles.delta)
    emb.objective = model.objective_value(x)
    if not math.isclose(emb.power.total, emb.objective, rel_tol=OBJ_RTOL, abs_tol=1e-9):
        raise DecodingError(
            f"recomputed power {emb.power.total:.9g} W differs from the model objective {emb.objective:.9g} W"
        )
    return emb


def embedding_power(
    embedding: Embedding, topology: PhysicalTopology, catalog: DeviceCatalog, delta: float | None = None
) -> PowerBreakdown:
    """Per-device and total watts for the embedding's loads, from catalog formulas only."""
    delta = catalog.delta if delta is None else delta
    devices: dict[str, float] = {}
    proc_total = 0.0
    net_total = 0.0
    for node_id, (mips, kbps) in sorted(embedding.device_loads.items()):
        node = topology.node(node_id)
        if mips > 0 and node.processing_profile is None:
            raise CapacityError(f"{node_id} has processing load but no processing capability")
        if kbps > 0 and node.network_profile is None:
            raise CapacityError(f"{node_id} has traffic but no network profile")
        if mips <= 0 and kbps <= 0:
            continue
        watts_proc = watts_net = 0.0
        if node.role == "iot-device":
            # one device, one idle charge: attributed to processing when it computes
            cpu = catalog.processing[node.processing_profile]
            radio = catalog.network[node.network_profile]
            idle = max(cpu.idle_power, radio.idle_power)
            if mips > 0:
                watts_proc = processing_power(cpu, mips, True) - cpu.idle_power + idle
                watts_net = network_power(radio, kbps, True, delta) - radio.idle_power
            else:
                watts_net = network_power(radio, kbps, True, delta) - radio.idle_power + idle
        else:
            if node.processing_profile is not None:
                watts_proc = processing_power(catalog.processing[node.processing_profile], mips, mips > 0)
            if node.network_profile is not None:
                watts_net = network_power(catalog.network[node.network_profile], kbps, kbps > 0, delta)
        devices[node_id] = watts_proc + watts_net
        proc_total += watts_proc
        net_total += watts_net
    return PowerBreakdown(devices=devices, processing=proc_total, network=net_total)
