"""Device power and capacity profiles.

Every device follows a linear power profile: an idle part charged whenever the
device is switched on, plus a load-proportional part whose slope is
``(max_power - idle_power) / capacity``. Networking devices that are shared
with other applications are charged only a ``delta`` fraction of their idle
power.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from types import MappingProxyType
from typing import Any, Mapping

from nnembed.errors import CapacityError, ParameterError

# Relative slack used when checking loads against capacities.
_CAP_RTOL = 1e-9

# Documented defaults for network bitrate capacities (kbps). None of these are
# published alongside the power figures; all of them can be overridden.
ZIGBEE_KBPS = 250.0
WIFI_KBPS = 54_000.0
PON_KBPS = 2_500_000.0
CORE_KBPS = 10_000_000.0

SLOPE_RTOL = 0.01


def derive_slope(idle_power: float, max_power: float, capacity: float) -> float:
    """Watts per unit of load for a linear power profile."""
    if not capacity > 0:
        raise ParameterError(f"capacity must be positive, got {capacity!r}")
    if max_power < idle_power:
        raise ParameterError(f"max power {max_power} below idle power {idle_power}")
    if idle_power < 0:
        raise ParameterError(f"idle power must be non-negative, got {idle_power}")
    return (max_power - idle_power) / capacity


@dataclass(frozen=True)
class ProcessingProfile:
    kind: str
    capacity: float
    idle_power: float
    max_power: float
    table_slope: float | None = None
    label: str = ""
    location: str = ""

    def __post_init__(self) -> None:
        derive_slope(self.idle_power, self.max_power, self.capacity)

    @property
    def slope(self) -> float:
        return derive_slope(self.idle_power, self.max_power, self.capacity)


@dataclass(frozen=True)
class NetworkProfile:
    kind: str
    idle_power: float
    max_power: float
    bitrate_capacity: float
    delta_shared: bool = False
    label: str = ""
    location: str = ""

    def __post_init__(self) -> None:
        derive_slope(self.idle_power, self.max_power, self.bitrate_capacity)

    @property
    def energy_per_bit(self) -> float:
        """Watts per kbps of throughput."""
        return derive_slope(self.idle_power, self.max_power, self.bitrate_capacity)


def _check_load(load: float, capacity: float, active: bool, what: str) -> None:
    if load < 0:
        raise ParameterError(f"negative {what}: {load}")
    if load > capacity * (1 + _CAP_RTOL):
        raise CapacityError(f"{what} {load} exceeds capacity {capacity}")
    if load > 0 and not active:
        raise ParameterError(f"{what} {load} on an inactive device")


def processing_power(profile: ProcessingProfile, load: float, active: bool) -> float:
    _check_load(load, profile.capacity, active, "processing load")
    if not active:
        return 0.0
    return profile.idle_power + profile.slope * load


def idle_share(profile: NetworkProfile, delta: float) -> float:
    """Fraction of the idle power attributed to this application."""
    return delta if profile.delta_shared else 1.0


def network_power(profile: NetworkProfile, throughput: float, active: bool, delta: float) -> float:
    _check_load(throughput, profile.bitrate_capacity, active, "throughput")
    if not active:
        return 0.0
    return idle_share(profile, delta) * profile.idle_power + profile.energy_per_bit * throughput


@dataclass(frozen=True)
class SlopeCheck:
    kind: str
    table_slope: float
    derived_slope: float

    @property
    def relative_error(self) -> float:
        return abs(self.table_slope - self.derived_slope) / self.derived_slope

    def __str__(self) -> str:
        return (
            f"{self.kind}: table slope {self.table_slope:g} W/MIPS disagrees with "
            f"derived {self.derived_slope:.6g} W/MIPS ({100 * self.relative_error:.4g}% off); "
            "derived value is used"
        )


@dataclass(frozen=True)
class DeviceCatalog:
    processing: Mapping[str, ProcessingProfile]
    network: Mapping[str, NetworkProfile]
    delta: float = 0.01
    slope_report: tuple[SlopeCheck, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if not 0 < self.delta <= 1:
            raise ParameterError(f"delta must be in (0, 1], got {self.delta}")
        object.__setattr__(self, "processing", MappingProxyType(dict(self.processing)))
        object.__setattr__(self, "network", MappingProxyType(dict(self.network)))
        if not self.slope_report:
            object.__setattr__(self, "slope_report", tuple(check_slopes(self.processing.values())))

    def share(self, kind: str) -> float:
        return idle_share(self.network[kind], self.delta)

    def charged_idle(self, kind: str) -> float:
        """Idle watts charged to an active network device of this class."""
        return self.share(kind) * self.network[kind].idle_power

    def with_delta(self, delta: float) -> "DeviceCatalog":
        return replace(self, delta=delta)

    def to_dict(self) -> dict[str, Any]:
        return {
            "delta": self.delta,
            "network": [
                {
                    "kind": p.kind,
                    "label": p.label,
                    "idle_w": p.idle_power,
                    "max_w": p.max_power,
                    "bitrate_kbps": p.bitrate_capacity,
                    "delta_shared": p.delta_shared,
                    "location": p.location,
                }
                for p in self.network.values()
            ],
            "processing": [
                {
                    "kind": p.kind,
                    "label": p.label,
                    "capacity_mips": p.capacity,
                    "table_w_per_mips": p.table_slope,
                    "idle_w": p.idle_power,
                    "max_w": p.max_power,
                    "location": p.location,
                }
                for p in self.processing.values()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "DeviceCatalog":
        try:
            network = {
                row["kind"]: NetworkProfile(
                    kind=row["kind"],
                    idle_power=float(row["idle_w"]),
                    max_power=float(row["max_w"]),
                    bitrate_capacity=float(row["bitrate_kbps"]),
                    delta_shared=bool(row.get("delta_shared", False)),
                    label=row.get("label", ""),
                    location=row.get("location", ""),
                )
                for row in doc.get("network", [])
            }
            processing = {
                row["kind"]: ProcessingProfile(
                    kind=row["kind"],
                    capacity=float(row["capacity_mips"]),
                    idle_power=float(row["idle_w"]),
                    max_power=float(row["max_w"]),
                    table_slope=row.get("table_w_per_mips"),
                    label=row.get("label", ""),
                    location=row.get("location", ""),
                )
                for row in doc.get("processing", [])
            }
        except KeyError as exc:
            raise ParameterError(f"catalog row is missing field {exc}") from None
        return cls(processing=processing, network=network, delta=float(doc.get("delta", 0.01)))

    @classmethod
    def from_json(cls, text: str) -> "DeviceCatalog":
        return cls.from_dict(json.loads(text))


def check_slopes(profiles, rtol: float = SLOPE_RTOL) -> list[SlopeCheck]:
    """Rows whose tabulated W/MIPS figure disagrees with the derived slope."""
    bad = []
    for p in profiles:
        if p.table_slope is None:
            continue
        check = SlopeCheck(p.kind, float(p.table_slope), p.slope)
        if check.relative_error > rtol:
            bad.append(check)
    return bad


# Network devices: (kind, label, idle W, max W, delta-shared, location, default kbps)
_NETWORK_ROWS = [
    ("iot-rpi-zero", "IoT (RPI Zero)", 0.5, 3.96, False, "IoT", ZIGBEE_KBPS),
    ("iot-cc3100mod", "IoT (CC3100MOD)", 0.001, 0.11, False, "IoT", WIFI_KBPS),
    ("wifi-ap", "Wi-Fi Access Point", 0.34, 0.56, False, "Network", WIFI_KBPS),
    ("onu", "ONU", 9, 15, True, "Gateway Fog", PON_KBPS),
    ("olt", "OLT", 60, 1940, True, "Network", PON_KBPS),
    ("fog-router", "Fog Router", 11.7, 30, True, "Access Fog", CORE_KBPS),
    ("metro-switch", "Metro Switch", 128, 247, True, "Network", CORE_KBPS),
    ("cloud-router", "Cloud Router", 27, 30, True, "Cloud", CORE_KBPS),
    ("cloud-switch", "Cloud Switch", 128, 423, True, "Cloud", CORE_KBPS),
]

# Processing devices: (kind, label, MIPS, tabulated W/MIPS, idle W, max W, location)
_PROCESSING_ROWS = [
    ("iot-rpi-zero", "IoT (RPI Zero)", 1000, 3460e-6, 0.5, 3.96, "IoT"),
    ("iot-cc3100mod", "IoT (CC3100MOD)", 856, 0.856, 0.001, 0.11, "IoT"),
    ("gateway-fog", "Gateway Fog", 2400, 4375e-6, 2, 12.5, "Gateway Fog"),
    ("access-fog-server", "Access Fog Server", 34200, 1111e-6, 57, 95, "Access Fog"),
    ("cloud-server", "Cloud Server", 108000, 481e-6, 78, 130, "Cloud"),
]


def load_default_catalog(
    delta: float = 0.01, capacity_overrides: Mapping[str, float] | None = None
) -> DeviceCatalog:
    """Catalog with the reference device tables.

    ``capacity_overrides`` maps a network device class to its bitrate capacity
    in kbps.
    """
    overrides = dict(capacity_overrides or {})
    known = {row[0] for row in _NETWORK_ROWS}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ParameterError(f"capacity override for unknown device class: {', '.join(unknown)}")
    network = {}
    for kind, label, idle, mx, shared, loc, kbps in _NETWORK_ROWS:
        network[kind] = NetworkProfile(
            kind=kind,
            idle_power=float(idle),
            max_power=float(mx),
            bitrate_capacity=float(overrides.get(kind, kbps)),
            delta_shared=shared,
            label=label,
            location=loc,
        )
    processing = {
        kind: ProcessingProfile(
            kind=kind,
            capacity=float(mips),
            idle_power=float(idle),
            max_power=float(mx),
            table_slope=table,
            label=label,
            location=loc,
        )
        for kind, label, mips, table, idle, mx, loc in _PROCESSING_ROWS
    }
    return DeviceCatalog(processing=processing, network=network, delta=delta)


def _fmt(value: float) -> str:
    return f"{value:g}"


def _fmt_w_per_mips(value: float | None) -> str:
    if value is None:
        return "-"
    if value < 0.01:
        return f"{round(value * 1e6)} μ"
    return _fmt(value)


def render_tables(catalog: DeviceCatalog) -> str:
    """Tab-separated text rendering of both device tables plus slope warnings."""
    lines = ["Device Type\tIdle Power (W)\tδ (%)\tMax Power (W)\tLocation"]
    for p in catalog.network.values():
        lines.append(
            "\t".join(
                [
                    p.label or p.kind,
                    _fmt(p.idle_power),
                    "1, 5 or 10" if p.delta_shared else "-",
                    _fmt(p.max_power),
                    p.location,
                ]
            )
        )
    lines.append("")
    lines.append("Device Type\tCapacity (MIPS)\tW/MIPS\tIdle Power (W)\tMax Power (W)\tLocation")
    for p in catalog.processing.values():
        lines.append(
            "\t".join(
                [
                    p.label or p.kind,
                    _fmt(p.capacity),
                    _fmt_w_per_mips(p.table_slope),
                    _fmt(p.idle_power),
                    _fmt(p.max_power),
                    p.location,
                ]
            )
        )
    lines.append("")
    lines.append("Network bitrate capacities (kbps, configuration values):")
    for p in catalog.network.values():
        lines.append(f"  {p.kind}\t{_fmt(p.bitrate_capacity)}")
    lines.append("")
    if catalog.slope_report:
        lines.append("Slope validation:")
        lines.extend(f"  WARNING {check}" for check in catalog.slope_report)
    else:
        lines.append("Slope validation: all tabulated slopes agree within 1%")
    return "\n".join(lines) + "\n"


def catalog_asdict(catalog: DeviceCatalog) -> dict[str, Any]:
    doc = catalog.to_dict()
    doc["slope_report"] = [asdict(c) | {"relative_error": c.relative_error} for c in catalog.slope_report]
    return doc
