"""Neural-network service requests as layered virtual topologies."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Any, Mapping

from nnembed.errors import GenerationError, ParameterError
from nnembed.rng import SplitMix64
from nnembed.topology import PhysicalTopology

LAYERS = ("input", "hidden", "output")
LAYER_FUNCTION = {"input": "sensing", "hidden": "control", "output": "actuation"}
_PREFIX = {"input": "in", "hidden": "hid", "output": "out"}


@dataclass(frozen=True)
class VirtualNode:
    id: str
    layer: str
    demand: float
    function_required: str
    anchor: str | None = None


@dataclass(frozen=True)
class VirtualLink:
    src: str
    dst: str
    traffic: float


@dataclass(frozen=True)
class AnchorFlow:
    kind: str  # "source": anchor -> input node, "sink": output node -> anchor
    physical: str
    virtual: str
    traffic: float


@dataclass(frozen=True)
class Commodity:
    """One routed demand with its two endpoints.

    Endpoints are either ``("virtual", node id)`` for placeable neurons or
    ``("physical", node id)`` for fixed sensor/actuator anchors.
    """

    name: str
    src: tuple[str, str]
    dst: tuple[str, str]
    traffic: float


@dataclass(frozen=True)
class RequestConfig:
    layer_sizes: tuple[int, int, int] = (2, 2, 1)
    demand_fraction: float = 1.0
    reference_capacity: float = 1000.0
    traffic: float = 50.0
    seed: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) != 3 or min(self.layer_sizes) < 1:
            raise ParameterError(f"layer_sizes must be three positive counts, got {self.layer_sizes}")
        if not 0 < self.demand_fraction:
            raise ParameterError("demand_fraction must be positive")
        if not self.reference_capacity > 0 or not self.traffic > 0:
            raise ParameterError("reference_capacity and traffic must be positive")

    @property
    def demand(self) -> float:
        return self.demand_fraction * self.reference_capacity

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["layer_sizes"] = list(self.layer_sizes)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "RequestConfig":
        extra = set(doc) - set(cls.__dataclass_fields__)
        if extra:
            raise ParameterError(f"unknown request config fields: {sorted(extra)}")
        return cls(**dict(doc))


@dataclass(frozen=True)
class NNRequest:
    nodes: tuple[VirtualNode, ...]
    links: tuple[VirtualLink, ...]
    anchors: tuple[AnchorFlow, ...]
    demand_fraction: float
    config: RequestConfig | None = None

    def node(self, node_id: str) -> VirtualNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def total_demand(self) -> float:
        return sum(n.demand for n in self.nodes)

    def commodities(self) -> list[Commodity]:
        """Virtual links first, then anchor flows, in declaration order."""
        out = [
            Commodity(f"{l.src}->{l.dst}", ("virtual", l.src), ("virtual", l.dst), l.traffic)
            for l in self.links
        ]
        for a in self.anchors:
            if a.kind == "source":
                out.append(Commodity(f"{a.physical}=>{a.virtual}", ("physical", a.physical), ("virtual", a.virtual), a.traffic))
            else:
                out.append(Commodity(f"{a.virtual}=>{a.physical}", ("virtual", a.virtual), ("physical", a.physical), a.traffic))
        return out

    def with_demand_fraction(self, fraction: float, reference_capacity: float | None = None) -> "NNRequest":
        """Same virtual topology and anchors with a new homogeneous demand."""
        ref = reference_capacity
        if ref is None:
            ref = self.config.reference_capacity if self.config else 1000.0
        demand = fraction * ref
        nodes = tuple(VirtualNode(n.id, n.layer, demand, n.function_required, n.anchor) for n in self.nodes)
        config = None
        if self.config is not None:
            config = RequestConfig(**{**self.config.to_dict(), "demand_fraction": fraction, "reference_capacity": ref})
        return NNRequest(nodes, self.links, self.anchors, fraction, config)

    def with_traffic(self, traffic: float) -> "NNRequest":
        links = tuple(VirtualLink(l.src, l.dst, traffic) for l in self.links)
        anchors = tuple(AnchorFlow(a.kind, a.physical, a.virtual, traffic) for a in self.anchors)
        config = None
        if self.config is not None:
            config = RequestConfig(**{**self.config.to_dict(), "traffic": traffic})
        return NNRequest(self.nodes, links, anchors, self.demand_fraction, config)

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict() if self.config else None,
            "demand_fraction": self.demand_fraction,
            "nodes": [asdict(n) for n in self.nodes],
            "links": [asdict(l) for l in self.links],
            "anchors": [asdict(a) for a in self.anchors],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "NNRequest":
        config = RequestConfig.from_dict(doc["config"]) if doc.get("config") else None
        return cls(
            nodes=tuple(VirtualNode(**n) for n in doc["nodes"]),
            links=tuple(VirtualLink(**l) for l in doc["links"]),
            anchors=tuple(AnchorFlow(**a) for a in doc["anchors"]),
            demand_fraction=float(doc["demand_fraction"]),
            config=config,
        )

    @classmethod
    def from_json(cls, text: str) -> "NNRequest":
        return cls.from_dict(json.loads(text))


def _capable(topology: PhysicalTopology, function: str, network: int | None = None) -> list[str]:
    return [
        n.id
        for n in topology.nodes
        if n.role == "iot-device"
        and function in n.functions
        and (network is None or n.iot_network_index == network)
    ]


def build_request(config: RequestConfig, topology: PhysicalTopology) -> NNRequest:
    n_in, n_hid, n_out = config.layer_sizes
    networks = sorted({n.iot_network_index for n in topology.nodes if n.role == "iot-device"})
    if len(networks) < 2:
        raise GenerationError("a request must span two IoT networks but the topology has fewer")

    rng = SplitMix64(config.seed)
    used: set[str] = set()

    def draw(candidates: list[str], k: int, what: str) -> list[str]:
        pool = [c for c in candidates if c not in used]
        if len(pool) < k:
            raise GenerationError(f"not enough {what} candidates: need {k}, have {len(pool)}")
        picked = rng.sample(pool, k)
        used.update(picked)
        return picked

    inputs: list[str] = []
    outputs: list[str] = []
    for net in networks[: min(2, n_in)]:
        inputs += draw(_capable(topology, "sensing", net), 1, f"sensing devices in network {net}")
    inputs += draw(_capable(topology, "sensing"), n_in - len(inputs), "sensing devices")
    if n_in == 1:
        # a single sensor spans the second network through the first actuator
        outputs += draw(_capable(topology, "actuation", networks[1]), 1, f"actuation devices in network {networks[1]}")
    outputs += draw(_capable(topology, "actuation"), n_out - len(outputs), "actuation devices")

    demand = config.demand
    nodes = []
    for i in range(n_in):
        nodes.append(VirtualNode(f"in{i}", "input", demand, "sensing", inputs[i]))
    for i in range(n_hid):
        nodes.append(VirtualNode(f"hid{i}", "hidden", demand, "control", None))
    for i in range(n_out):
        nodes.append(VirtualNode(f"out{i}", "output", demand, "actuation", outputs[i]))

    links = [VirtualLink(f"in{i}", f"hid{j}", config.traffic) for i in range(n_in) for j in range(n_hid)]
    links += [VirtualLink(f"hid{j}", f"out{o}", config.traffic) for j in range(n_hid) for o in range(n_out)]
    anchors = [AnchorFlow("source", inputs[i], f"in{i}", config.traffic) for i in range(n_in)]
    anchors += [AnchorFlow("sink", outputs[o], f"out{o}", config.traffic) for o in range(n_out)]
    return NNRequest(tuple(nodes), tuple(links), tuple(anchors), config.demand_fraction, config)


def validate_request(request: NNRequest, topology: PhysicalTopology) -> list[str]:
    problems = []
    ids = [n.id for n in request.nodes]
    if len(set(ids)) != len(ids):
        problems.append("duplicate virtual node ids")
    layer = {n.id: n.layer for n in request.nodes}
    for n in request.nodes:
        if n.layer not in LAYERS:
            problems.append(f"{n.id}: unknown layer {n.layer!r}")
            continue
        if n.function_required != LAYER_FUNCTION[n.layer]:
            problems.append(f"{n.id}: {n.layer} node must request {LAYER_FUNCTION[n.layer]}")
        if n.layer == "hidden" and n.anchor is not None:
            problems.append(f"{n.id}: structure violation, hidden node carries an anchor")
        if n.layer != "hidden" and n.anchor is None:
            problems.append(f"{n.id}: structure violation, {n.layer} node lacks an anchor")
        if not n.demand > 0:
            problems.append(f"{n.id}: demand must be positive")
        if n.anchor is not None:
            if not topology.has_node(n.anchor):
                problems.append(f"{n.id}: anchor {n.anchor} not in topology")
            elif n.function_required not in topology.node(n.anchor).functions:
                problems.append(f"{n.id}: anchor {n.anchor} lacks function {n.function_required}")
    if len({n.demand for n in request.nodes}) > 1:
        problems.append("demands are not homogeneous")

    for l in request.links:
        pair = (layer.get(l.src), layer.get(l.dst))
        if pair not in (("input", "hidden"), ("hidden", "output")):
            problems.append(f"link {l.src}->{l.dst}: must join consecutive layers")
    expected = {(a, b) for a in layer for b in layer if (layer[a], layer[b]) in (("input", "hidden"), ("hidden", "output"))}
    present = {(l.src, l.dst) for l in request.links}
    for a, b in sorted(expected - present):
        problems.append(f"link {a}->{b}: missing from the dense layer structure")

    by_virtual = {}
    for a in request.anchors:
        by_virtual.setdefault(a.virtual, []).append(a)
        want = "source" if layer.get(a.virtual) == "input" else "sink" if layer.get(a.virtual) == "output" else None
        if want != a.kind:
            problems.append(f"anchor flow {a.kind} on {a.virtual}: wrong kind for its layer")
        node = next((n for n in request.nodes if n.id == a.virtual), None)
        if node is not None and node.anchor != a.physical:
            problems.append(f"anchor flow on {a.virtual}: physical end {a.physical} differs from node anchor")
    for n in request.nodes:
        if n.layer != "hidden" and len(by_virtual.get(n.id, [])) != 1:
            problems.append(f"{n.id}: expected exactly one anchor flow")

    rates = {l.traffic for l in request.links} | {a.traffic for a in request.anchors}
    if len(rates) > 1:
        problems.append("traffic is not constant across commodities")

    # inputs must cover two networks; a lone input may rely on an output anchor
    inputs = [n for n in request.nodes if n.layer == "input"]
    spanning = inputs if len(inputs) >= 2 else [n for n in request.nodes if n.layer != "hidden"]
    nets = {
        topology.node(n.anchor).iot_network_index
        for n in spanning
        if n.anchor is not None and topology.has_node(n.anchor)
    }
    if len(nets) < 2:
        who = "input anchors" if len(inputs) >= 2 else "anchors"
        problems.append(f"spanning violation: {who} do not cover two IoT networks")
    return problems
