import json
import math

from hypothesis import given, strategies as st
import pytest

from nnembed.catalog import (
    DeviceCatalog,
    check_slopes,
    derive_slope,
    idle_share,
    load_default_catalog,
    network_power,
    processing_power,
    render_tables,
)
from nnembed.errors import CapacityError, ParameterError

# device tables: (idle W, max W) per class
NETWORK_TABLE = {
    "iot-rpi-zero": (0.5, 3.96, False),
    "iot-cc3100mod": (0.001, 0.11, False),
    "wifi-ap": (0.34, 0.56, False),
    "onu": (9, 15, True),
    "olt": (60, 1940, True),
    "fog-router": (11.7, 30, True),
    "metro-switch": (128, 247, True),
    "cloud-router": (27, 30, True),
    "cloud-switch": (128, 423, True),
}
PROCESSING_TABLE = {
    "iot-rpi-zero": (1000, 0.5, 3.96),
    "iot-cc3100mod": (856, 0.001, 0.11),
    "gateway-fog": (2400, 2, 12.5),
    "access-fog-server": (34200, 57, 95),
    "cloud-server": (108000, 78, 130),
}


def test_tables_match_reference(catalog):
    for kind, (idle, mx, shared) in NETWORK_TABLE.items():
        p = catalog.network[kind]
        assert (p.idle_power, p.max_power, p.delta_shared) == (idle, mx, shared)
    for kind, (cap, idle, mx) in PROCESSING_TABLE.items():
        p = catalog.processing[kind]
        assert (p.capacity, p.idle_power, p.max_power) == (cap, idle, mx)


def test_derive_slope_examples():
    assert derive_slope(0.5, 3.96, 1000) == pytest.approx(0.00346, rel=1e-12)
    assert derive_slope(78, 130, 108000) == pytest.approx(4.8148e-4, rel=1e-4)
    assert derive_slope(5, 5, 100) == 0.0
    with pytest.raises(ParameterError):
        derive_slope(5, 4, 100)
    with pytest.raises(ParameterError):
        derive_slope(1, 2, 0)


def test_processing_power_examples(catalog):
    rpi = catalog.processing["iot-rpi-zero"]
    assert processing_power(rpi, 1000, True) == pytest.approx(3.96, rel=1e-12)
    assert processing_power(rpi, 600, True) == pytest.approx(2.576, rel=1e-12)
    assert processing_power(rpi, 0, False) == 0.0
    with pytest.raises(CapacityError):
        processing_power(rpi, 1001, True)
    with pytest.raises(ParameterError):
        processing_power(rpi, 10, False)
    with pytest.raises(ParameterError):
        processing_power(rpi, -1, True)


def test_network_power_examples(catalog):
    assert network_power(catalog.network["olt"], 0, True, 0.01) == pytest.approx(0.6, rel=1e-12)
    ap = catalog.network["wifi-ap"]
    assert network_power(ap, ap.bitrate_capacity, True, 0.37) == pytest.approx(0.56, rel=1e-12)
    assert network_power(ap, 0, False, 0.5) == 0.0


def test_delta_scales_shared_idle_only():
    cat = load_default_catalog(delta=0.05)
    assert cat.charged_idle("olt") == pytest.approx(3.0, rel=1e-12)
    assert cat.charged_idle("wifi-ap") == 0.34
    assert idle_share(cat.network["onu"], 0.05) == 0.05
    assert idle_share(cat.network["iot-rpi-zero"], 0.05) == 1.0


@pytest.mark.parametrize("delta", [0.01, 0.05, 0.10, 1.0])
def test_zero_and_full_load_every_class(delta):
    cat = load_default_catalog(delta=delta)
    for p in cat.network.values():
        share = delta if p.delta_shared else 1.0
        assert network_power(p, 0, True, delta) == pytest.approx(share * p.idle_power, rel=1e-9)
        full = network_power(p, p.bitrate_capacity, True, delta)
        assert full == pytest.approx(p.max_power - (1 - share) * p.idle_power, rel=1e-9)
        if not p.delta_shared:
            assert full == pytest.approx(p.max_power, rel=1e-9)
    for p in cat.processing.values():
        assert processing_power(p, 0, True) == pytest.approx(p.idle_power, rel=1e-9)
        assert processing_power(p, p.capacity, True) == pytest.approx(p.max_power, rel=1e-9)


def test_slope_report_flags_only_cc3100mod(catalog):
    flagged = {c.kind: c for c in catalog.slope_report}
    assert set(flagged) == {"iot-cc3100mod"}
    c = flagged["iot-cc3100mod"]
    assert c.table_slope == 0.856
    assert c.derived_slope == pytest.approx((0.11 - 0.001) / 856, rel=1e-12)
    assert catalog.processing["iot-cc3100mod"].slope == pytest.approx(1.2734e-4, rel=1e-4)
    for kind in ("iot-rpi-zero", "gateway-fog", "access-fog-server", "cloud-server"):
        p = catalog.processing[kind]
        assert abs(p.table_slope - p.slope) / p.slope < 0.01
    assert check_slopes(catalog.processing.values()) == list(catalog.slope_report)


def test_render_tables_lists_rows_and_flag(catalog):
    text = render_tables(catalog)
    for label in ("IoT (RPI Zero)", "Wi-Fi Access Point", "OLT", "Cloud Switch", "Access Fog Server"):
        assert label in text
    assert "1, 5 or 10" in text
    assert "3460 μ" in text and "481 μ" in text and "0.856" in text
    assert "WARNING iot-cc3100mod" in text


def test_json_round_trip(catalog):
    doc = json.loads(catalog.to_json())
    for row in doc["network"]:
        assert {"kind", "idle_w", "max_w", "bitrate_kbps", "delta_shared"} <= set(row)
    for row in doc["processing"]:
        assert {"kind", "idle_w", "max_w", "capacity_mips"} <= set(row)
    back = DeviceCatalog.from_json(catalog.to_json())
    assert back == catalog


def test_missing_field_and_bad_delta():
    with pytest.raises(ParameterError):
        DeviceCatalog.from_dict({"network": [{"kind": "x", "idle_w": 1}]})
    with pytest.raises(ParameterError):
        load_default_catalog(delta=0)
    with pytest.raises(ParameterError):
        load_default_catalog(capacity_overrides={"nope": 1})


def test_capacity_override():
    cat = load_default_catalog(capacity_overrides={"onu": 1e6})
    assert cat.network["onu"].bitrate_capacity == 1e6
    assert cat.network["onu"].energy_per_bit == pytest.approx(6 / 1e6)


@given(
    idle=st.floats(0, 100),
    extra=st.floats(0, 1000),
    cap=st.floats(1, 1e6),
    f1=st.floats(0, 1),
    f2=st.floats(0, 1),
)
def test_processing_power_linear_and_monotone(idle, extra, cap, f1, f2):
    from nnembed.catalog import ProcessingProfile

    p = ProcessingProfile("x", cap, idle, idle + extra)
    lo, hi = sorted((f1 * cap, f2 * cap))
    a, b = processing_power(p, lo, True), processing_power(p, hi, True)
    assert a <= b + 1e-9
    mid = processing_power(p, (lo + hi) / 2, True)
    assert math.isclose(mid, (a + b) / 2, rel_tol=1e-9, abs_tol=1e-9)
