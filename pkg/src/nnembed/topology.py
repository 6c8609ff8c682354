"""Reference physical infrastructure: Zigbee IoT meshes, PON access, fog and cloud tiers."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping

import networkx as nx

from nnembed.catalog import WIFI_KBPS, ZIGBEE_KBPS, PON_KBPS, CORE_KBPS, DeviceCatalog
from nnembed.errors import GenerationError, ParameterError
from nnembed.rng import SplitMix64

MAX_ATTEMPTS = 1000

FUNCTIONS = ("sensing", "control", "actuation")

ROLES = (
    "iot-device",
    "relay",
    "wifi-ap",
    "onu",
    "gateway-fog",
    "olt",
    "fog-router",
    "access-fog-server",
    "metro-switch",
    "cloud-router",
    "cloud-switch",
    "cloud-server",
)

# role -> (network profile kind, processing profile kind)
ROLE_PROFILES: dict[str, tuple[str | None, str | None]] = {
    "iot-device": ("iot-rpi-zero", "iot-rpi-zero"),
    "relay": ("iot-cc3100mod", None),
    "wifi-ap": ("wifi-ap", None),
    "onu": ("onu", None),
    "gateway-fog": (None, "gateway-fog"),
    "olt": ("olt", None),
    "fog-router": ("fog-router", None),
    "access-fog-server": (None, "access-fog-server"),
    "metro-switch": ("metro-switch", None),
    "cloud-router": ("cloud-router", None),
    "cloud-switch": ("cloud-switch", None),
    "cloud-server": (None, "cloud-server"),
}

MEDIUM_KBPS = {
    "zigbee": ZIGBEE_KBPS,
    "wifi": WIFI_KBPS,
    "fiber": PON_KBPS,
    "ethernet": CORE_KBPS,
}

# Processing tier of each processing-capable role.
LAYER_OF_ROLE = {
    "iot-device": "iot",
    "gateway-fog": "gateway-fog",
    "access-fog-server": "access-fog",
    "cloud-server": "cloud",
}


class Restriction(str, enum.Enum):
    """Which processing layers a run may use."""

    IOT_ONLY = "iot-only"
    IOT_PON = "iot-pon"
    PON_ONLY = "pon-only"
    OPTIMAL = "optimal"
    CLOUD = "cloud"

    @property
    def layers(self) -> tuple[str, ...]:
        return _RESTRICTION_LAYERS[self]


_RESTRICTION_LAYERS = {
    Restriction.IOT_ONLY: ("iot",),
    Restriction.IOT_PON: ("iot", "gateway-fog", "access-fog"),
    Restriction.PON_ONLY: ("gateway-fog", "access-fog"),
    Restriction.OPTIMAL: ("iot", "gateway-fog", "access-fog", "cloud"),
    Restriction.CLOUD: ("cloud",),
}


@dataclass(frozen=True)
class PhysicalNode:
    id: str
    role: str
    network_profile: str | None = None
    processing_profile: str | None = None
    functions: tuple[str, ...] = ()
    position: tuple[float, float] | None = None
    iot_network_index: int | None = None


@dataclass(frozen=True)
class PhysicalLink:
    src: str
    dst: str
    medium: str
    capacity: float


@dataclass(frozen=True)
class TopologyConfig:
    networks: int = 2
    devices_per_network: int = 30
    relays_per_network: int = 2
    area_side: float = 100.0
    zigbee_range: float = 30.0
    cloud_servers: int = 1
    seed: int = 1
    capacity_overrides: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("networks", "devices_per_network", "relays_per_network", "cloud_servers"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
        if not self.area_side > 0:
            raise ParameterError("area_side must be positive")
        if not 0 < self.zigbee_range <= 2 * self.area_side:
            raise ParameterError("zigbee_range must be in (0, 2 * area_side]")
        unknown = set(self.capacity_overrides) - set(MEDIUM_KBPS)
        if unknown:
            raise ParameterError(f"unknown medium in capacity overrides: {sorted(unknown)}")
        for medium, kbps in self.capacity_overrides.items():
            if not kbps > 0:
                raise ParameterError(f"capacity for {medium} must be positive")

    def medium_capacity(self, medium: str) -> float:
        return float(self.capacity_overrides.get(medium, MEDIUM_KBPS[medium]))

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["capacity_overrides"] = dict(sorted(self.capacity_overrides.items()))
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "TopologyConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ParameterError(f"unknown topology config fields: {sorted(extra)}")
        return cls(**dict(doc))


@dataclass(frozen=True)
class PhysicalTopology:
    nodes: tuple[PhysicalNode, ...]
    links: tuple[PhysicalLink, ...]
    attachment: Mapping[str, str]
    config: TopologyConfig
    attempts: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_id", {n.id: n for n in self.nodes})

    def node(self, node_id: str) -> PhysicalNode:
        return self._by_id[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._by_id

    def nodes_with_role(self, role: str) -> list[PhysicalNode]:
        return [n for n in self.nodes if n.role == role]

    @property
    def network_nodes(self) -> list[PhysicalNode]:
        return [n for n in self.nodes if n.network_profile is not None]

    @property
    def processing_nodes(self) -> list[PhysicalNode]:
        return [n for n in self.nodes if n.processing_profile is not None]

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(n.id for n in self.network_nodes)
        for link in self.links:
            g.add_edge(link.src, link.dst, capacity=link.capacity, medium=link.medium)
        return g

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "attempts": self.attempts,
            "nodes": [
                {
                    "id": n.id,
                    "role": n.role,
                    "network_profile": n.network_profile,
                    "processing_profile": n.processing_profile,
                    "functions": list(n.functions),
                    "position": list(n.position) if n.position is not None else None,
                    "iot_network_index": n.iot_network_index,
                }
                for n in self.nodes
            ],
            "links": [asdict(link) for link in self.links],
            "attachment": dict(self.attachment),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "PhysicalTopology":
        nodes = tuple(
            PhysicalNode(
                id=n["id"],
                role=n["role"],
                network_profile=n.get("network_profile"),
                processing_profile=n.get("processing_profile"),
                functions=tuple(n.get("functions", ())),
                position=tuple(n["position"]) if n.get("position") is not None else None,
                iot_network_index=n.get("iot_network_index"),
            )
            for n in doc["nodes"]
        )
        links = tuple(PhysicalLink(**link) for link in doc["links"])
        return cls(
            nodes=nodes,
            links=links,
            attachment=dict(doc["attachment"]),
            config=TopologyConfig.from_dict(doc["config"]),
            attempts=int(doc.get("attempts", 1)),
        )

    @classmethod
    def from_json(cls, text: str) -> "PhysicalTopology":
        return cls.from_dict(json.loads(text))

    def edge_list(self) -> str:
        """Plain-text edge list, one directed link per line."""
        lines = ["# src dst medium capacity_kbps"]
        lines += [f"{l.src} {l.dst} {l.medium} {l.capacity:g}" for l in self.links]
        return "\n".join(lines) + "\n"


def _mesh_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    return nx.is_connected(g)


def _sample_meshes(config: TopologyConfig, rng: SplitMix64):
    """Positions and zigbee edges per network, or None if a mesh is disconnected."""
    meshes = []
    size = config.devices_per_network + config.relays_per_network
    r2 = config.zigbee_range**2
    for _ in range(config.networks):
        pos = [(rng.uniform(0, config.area_side), rng.uniform(0, config.area_side)) for _ in range(size)]
        edges = [
            (i, j)
            for i in range(size)
            for j in range(i + 1, size)
            if (pos[i][0] - pos[j][0]) ** 2 + (pos[i][1] - pos[j][1]) ** 2 <= r2
        ]
        if not _mesh_connected(size, edges):
            return None
        meshes.append((pos, edges))
    return meshes


def build_topology(config: TopologyConfig, catalog: DeviceCatalog) -> PhysicalTopology:
    for role, (net, proc) in ROLE_PROFILES.items():
        if net is not None and net not in catalog.network:
            raise ParameterError(f"catalog lacks network device class {net!r} (role {role})")
        if proc is not None and proc not in catalog.processing:
            raise ParameterError(f"catalog lacks processing device class {proc!r} (role {role})")

    for attempt in range(MAX_ATTEMPTS):
        meshes = _sample_meshes(config, SplitMix64(config.seed + attempt))
        if meshes is not None:
            break
    else:
        raise GenerationError(
            f"no connected mesh sample within {MAX_ATTEMPTS} attempts; "
            "increase zigbee_range or reduce area_side"
        )

    nodes: list[PhysicalNode] = []
    links: list[PhysicalLink] = []
    attachment: dict[str, str] = {}

    def add(node_id: str, role: str, **kw) -> str:
        net, proc = ROLE_PROFILES[role]
        nodes.append(PhysicalNode(id=node_id, role=role, network_profile=net, processing_profile=proc, **kw))
        return node_id

    def connect(a: str, b: str, medium: str) -> None:
        cap = config.medium_capacity(medium)
        links.append(PhysicalLink(a, b, medium, cap))
        links.append(PhysicalLink(b, a, medium, cap))

    olt = "olt"
    onus = []
    for k, (pos, edges) in enumerate(meshes):
        mesh_ids = []
        for i in range(config.devices_per_network):
            mesh_ids.append(
                add(f"n{k}-iot{i}", "iot-device", functions=FUNCTIONS, position=pos[i], iot_network_index=k)
            )
        relays = []
        for j in range(config.relays_per_network):
            p = pos[config.devices_per_network + j]
            relays.append(add(f"n{k}-relay{j}", "relay", position=p, iot_network_index=k))
        mesh_ids.extend(relays)
        ap = add(f"n{k}-ap", "wifi-ap", iot_network_index=k)
        onu = add(f"n{k}-onu", "onu", iot_network_index=k)
        gw = add(f"n{k}-gwfog", "gateway-fog", iot_network_index=k)
        onus.append(onu)
        attachment[gw] = onu
        for i, j in edges:
            connect(mesh_ids[i], mesh_ids[j], "zigbee")
        for relay in relays:
            connect(relay, ap, "wifi")
        connect(ap, onu, "ethernet")
        for i in range(config.devices_per_network):
            attachment[mesh_ids[i]] = mesh_ids[i]

    add(olt, "olt")
    for onu in onus:
        connect(onu, olt, "fiber")
    add("fog-router", "fog-router")
    add("access-fog", "access-fog-server")
    attachment["access-fog"] = "fog-router"
    connect(olt, "fog-router", "ethernet")
    add("metro", "metro-switch")
    connect(olt, "metro", "ethernet")
    add("cloud-router", "cloud-router")
    add("cloud-switch", "cloud-switch")
    connect("metro", "cloud-router", "ethernet")
    connect("cloud-router", "cloud-switch", "ethernet")
    for c in range(config.cloud_servers):
        server = add(f"cloud-server{c}", "cloud-server")
        attachment[server] = "cloud-switch"

    return PhysicalTopology(
        nodes=tuple(nodes), links=tuple(links), attachment=attachment, config=config, attempts=attempt + 1
    )


def processing_sites(topology: PhysicalTopology, restriction: Restriction | str) -> list[str]:
    """Processing-capable node ids allowed by the restriction, in topology order."""
    layers = Restriction(restriction).layers
    return [
        n.id
        for n in topology.nodes
        if n.processing_profile is not None and LAYER_OF_ROLE.get(n.role) in layers
    ]


def layer_of(node: PhysicalNode) -> str | None:
    return LAYER_OF_ROLE.get(node.role)


def validate_topology(topology: PhysicalTopology, catalog: DeviceCatalog | None = None) -> list[str]:
    """Human-readable list of violations; empty when the topology is sound."""
    problems = []
    ids = [n.id for n in topology.nodes]
    if len(set(ids)) != len(ids):
        problems.append("duplicate node ids")
    by_id = {n.id: n for n in topology.nodes}

    for n in topology.nodes:
        if n.role not in ROLE_PROFILES:
            problems.append(f"{n.id}: unknown role {n.role!r}")
            continue
        want_net, want_proc = ROLE_PROFILES[n.role]
        if (n.network_profile is None) != (want_net is None):
            problems.append(f"{n.id}: network profile presence wrong for role {n.role}")
        if (n.processing_profile is None) != (want_proc is None):
            problems.append(f"{n.id}: processing profile presence wrong for role {n.role}")
        if catalog is not None:
            if n.network_profile is not None and n.network_profile not in catalog.network:
                problems.append(f"{n.id}: unknown network profile {n.network_profile!r}")
            if n.processing_profile is not None and n.processing_profile not in catalog.processing:
                problems.append(f"{n.id}: unknown processing profile {n.processing_profile!r}")

    pairs: dict[tuple[str, str], PhysicalLink] = {}
    for link in topology.links:
        for end in (link.src, link.dst):
            if end not in by_id:
                problems.append(f"link {link.src}->{link.dst}: unknown node {end}")
            elif by_id[end].network_profile is None:
                problems.append(f"link {link.src}->{link.dst}: {end} is not a network node")
        if not link.capacity > 0:
            problems.append(f"link {link.src}->{link.dst}: non-positive capacity")
        if (link.src, link.dst) in pairs:
            problems.append(f"link {link.src}->{link.dst}: duplicated")
        pairs[(link.src, link.dst)] = link
    for (a, b), link in pairs.items():
        back = pairs.get((b, a))
        if back is None:
            problems.append(f"link {a}->{b}: asymmetric, reverse direction missing")
        elif not math.isclose(back.capacity, link.capacity) or back.medium != link.medium:
            problems.append(f"link {a}->{b}: asymmetric capacity or medium")

    for n in topology.nodes:
        if n.processing_profile is None:
            continue
        host = topology.attachment.get(n.id)
        if host is None:
            problems.append(f"{n.id}: processing node without attachment")
        elif host not in by_id or by_id[host].network_profile is None:
            problems.append(f"{n.id}: attachment {host} is not a network node")
    for pid in topology.attachment:
        if pid not in by_id:
            problems.append(f"attachment for unknown node {pid}")

    net_ids = [n.id for n in topology.nodes if n.network_profile is not None]
    g = nx.Graph()
    g.add_nodes_from(net_ids)
    g.add_edges_from((l.src, l.dst) for l in topology.links if l.src in g and l.dst in g)
    if net_ids and not nx.is_connected(g):
        components = sorted(nx.connected_components(g), key=len, reverse=True)
        for comp in components[1:]:
            problems.append(f"disconnected from the transport graph: {', '.join(sorted(comp))}")

    zg = nx.Graph()
    zg.add_edges_from((l.src, l.dst) for l in topology.links if l.medium == "zigbee")
    relays = {n.id for n in topology.nodes if n.role == "relay"}
    for n in topology.nodes:
        if n.role != "iot-device":
            continue
        reach = nx.node_connected_component(zg, n.id) if n.id in zg else {n.id}
        if not reach & relays:
            problems.append(f"{n.id}: no zigbee path to a relay")
    return problems
