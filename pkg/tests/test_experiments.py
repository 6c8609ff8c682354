import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnembed.errors import ParameterError
from nnembed.experiments import (
    CSV_COLUMNS,
    PAPER_CALIBRATION,
    ResultRow,
    SweepSpec,
    delta_savings_violations,
    demand_monotonicity_violations,
    dominance_violations,
    fmt,
    optimal_matches_iot,
    paper_calibration,
    plot_data,
    rows_from_csv,
    rows_to_csv,
    run_sweep,
    summarize,
    summary_json,
    write_results,
)
from nnembed.oracle import REDUCED_TOPOLOGY
from nnembed.solver.mip import SolverConfig


def row(variant, total, delta=0.01, demand=0.2, seed=1, savings=math.nan, status="optimal", gap=0.0):
    return ResultRow(delta, variant, demand, seed, total, total / 2, total / 2, savings, status, gap, 0.1)


def grid_point(delta=0.01, demand=0.2, **totals):
    base = {"iot-only": 10.0, "iot-pon": 60.0, "pon-only": 55.0, "optimal": 10.0, "cloud": 100.0}
    base.update({k.replace("_", "-"): v for k, v in totals.items()})
    return [
        row(v, t, delta, demand, savings=100.0 * (base["cloud"] - t) / base["cloud"])
        for v, t in base.items()
    ]


def test_spec_defaults_and_size():
    spec = SweepSpec()
    assert spec.size == 75
    assert SweepSpec(deltas=[0.05]).size == 25
    assert spec.solver.gap_tol == 0.01


def test_spec_always_includes_cloud_in_canonical_order():
    spec = SweepSpec(variants=["optimal", "iot-only"])
    assert spec.variants == ("iot-only", "optimal", "cloud")


@pytest.mark.parametrize(
    "kwargs",
    [{"deltas": []}, {"deltas": [0.0]}, {"deltas": [1.5]}, {"demand_fractions": [-0.2]}, {"seeds": []}],
)
def test_spec_validation(kwargs):
    with pytest.raises(ParameterError):
        SweepSpec(**kwargs)
    with pytest.raises(ValueError):
        SweepSpec(variants=["edge"])


def test_spec_round_trip():
    spec = SweepSpec(deltas=[0.05], seeds=[3, 4], solver=SolverConfig(gap_tol=0.02))
    back = SweepSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert back.to_dict() == spec.to_dict()
    with pytest.raises(ParameterError):
        SweepSpec.from_dict({"bogus": 1})


def test_calibration_is_pinned():
    topo, req = paper_calibration()
    assert PAPER_CALIBRATION["version"] == 1
    assert req.traffic == 25.0
    assert topo.devices_per_network == 30


def test_fmt_fixed_digits():
    assert fmt(1 / 3) == "0.333333"
    assert fmt(123456789.0) == "1.23457e+08"
    assert fmt(0.0) == "0" and fmt(-0.0) == "0"
    assert fmt(math.nan) == "" and fmt(math.inf) == "inf"
    assert fmt(True) == "true" and fmt(7) == "7" and fmt("x") == "x"


def test_csv_round_trip():
    rows = grid_point() + [row("iot-pon", math.nan, status="infeasible", gap=math.inf, demand=0.4)]
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    back = rows_from_csv(text)
    assert len(back) == len(rows)
    assert rows_to_csv(back) == text
    assert math.isnan(back[-1].total_w) and back[-1].status == "infeasible"


def test_single_row_summary_equals_row():
    r = row("iot-only", 12.0, savings=80.0)
    entry = summarize([r])["per_variant"][0]
    assert entry["max_savings_pct"] == entry["mean_savings_pct"] == 80.0
    assert entry["rows"] == entry["solved"] == 1


def test_summary_ordering_and_flags():
    rows = grid_point(0.01, 0.2) + grid_point(0.01, 0.4, iot_only=20.0, optimal=20.0)
    s = summarize(rows)
    assert s["ordering_by_max_savings"]["0.01"] == ["iot-only", "optimal", "pon-only", "iot-pon"]
    assert s["optimal_matches_iot_only"] is True
    assert s["checks"] == {
        "dominance_violations": [],
        "demand_monotonicity_violations": [],
        "delta_savings_violations": [],
    }
    cloud = [e for e in s["per_variant"] if e["variant"] == "cloud"][0]
    assert cloud["max_savings_pct"] == 0.0


def test_dominance_violation_detected_with_gap_slack():
    rows = grid_point(optimal=10.5)
    assert dominance_violations(rows) == [{"seed": 1, "delta": 0.01, "demand_fraction": 0.2, "variant": "iot-only"}]
    assert optimal_matches_iot(rows) is False
    # a 10% proven gap on the optimal row covers the 5% excess
    rows[3].gap = 0.1
    assert dominance_violations(rows) == []


def test_unsolved_rows_excluded():
    rows = grid_point()
    rows[1] = row("iot-pon", math.nan, status="infeasible", gap=math.inf)
    assert dominance_violations(rows) == []
    entry = [e for e in summarize(rows)["per_variant"] if e["variant"] == "iot-pon"][0]
    assert entry["solved"] == 0 and entry["max_savings_pct"] is None


def test_monotonicity_checks():
    rows = grid_point(0.01, 0.2) + grid_point(0.01, 0.4, pon_only=50.0)
    assert demand_monotonicity_violations(rows) == [
        {"seed": 1, "delta": 0.01, "variant": "pon-only", "demand_fraction": 0.4}
    ]
    rows = grid_point(0.01) + grid_point(0.1, iot_pon=70.0)
    bad = delta_savings_violations(rows)
    assert [b["variant"] for b in bad] == ["iot-pon"]


def test_plot_data_files():
    rows = grid_point(0.01) + grid_point(0.05)
    files = plot_data(rows)
    assert sorted(files) == [
        "fig3_total_power_delta_0.01.csv",
        "fig3_total_power_delta_0.05.csv",
        "fig4_savings_delta_0.01.csv",
        "fig4_savings_delta_0.05.csv",
    ]
    lines = files["fig4_savings_delta_0.01.csv"].splitlines()
    assert lines[0] == "variant,demand_fraction,savings_pct,std_savings_pct"
    assert "iot-only,0.2,90,0" in lines


def test_seed_statistics():
    rows = grid_point() + grid_point(iot_only=20.0, optimal=20.0)
    for r in rows[5:]:
        r.seed = 2
    stats = [s for s in summarize(rows)["seed_statistics"] if s["variant"] == "iot-only"][0]
    assert stats["seeds"] == 2 and stats["mean_total_w"] == 15.0 and stats["std_total_w"] == 5.0


def test_write_results(tmp_path):
    rows = grid_point()
    paths = write_results(rows, tmp_path, with_plot_data=True)
    names = {p.relative_to(tmp_path).as_posix() for p in paths}
    assert {"results.csv", "timings.csv", "summary.json"} <= names
    assert any(n.startswith("plot-data/") for n in names)
    assert json.loads((tmp_path / "summary.json").read_text()) == json.loads(summary_json(summarize(rows)))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1.0, 1e4, allow_nan=False), min_size=4, max_size=4), st.floats(1e4, 1e5))
def test_savings_definition_and_optimal_dominance(totals, cloud):
    names = ["iot-only", "iot-pon", "pon-only", "optimal"]
    best = min(totals)
    totals[3] = best
    rows = [row(v, t, savings=100.0 * (cloud - t) / cloud) for v, t in zip(names, totals)] + [row("cloud", cloud, savings=0.0)]
    assert dominance_violations(rows) == []
    opt = max(e["max_savings_pct"] for e in summarize(rows)["per_variant"])
    assert opt == pytest.approx(100.0 * (cloud - best) / cloud)


def test_reduced_sweep_rows(catalog, calibration):
    from dataclasses import replace

    spec = SweepSpec(deltas=[0.05], demand_fractions=[0.2], solver=SolverConfig(gap_tol=1e-9))
    seen = []
    rows = run_sweep(spec, replace(calibration[0], **REDUCED_TOPOLOGY), calibration[1], catalog, lambda r, i, n: seen.append((i, n)))
    assert [r.variant for r in rows] == ["iot-only", "iot-pon", "pon-only", "optimal", "cloud"]
    assert seen[-1] == (5, 5)
    by = {r.variant: r for r in rows}
    assert by["cloud"].savings_pct == 0.0
    assert all(r.status == "optimal" for r in rows)
    assert all(by["optimal"].total_w <= r.total_w + 1e-9 for r in rows)
    for r in rows:
        assert r.savings_pct == pytest.approx(100 * (by["cloud"].total_w - r.total_w) / by["cloud"].total_w)
