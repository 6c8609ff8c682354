"""Command-line entry point.

Every command resolves one effective :class:`RunConfig` (shipped calibration,
then ``--config``, then explicit flags) and writes it next to its outputs.
Exit codes: 0 success, 2 usage or invalid input, 3 infeasible, 4 solver limit
without a proven optimum, 5 internal verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from nnembed.catalog import DeviceCatalog, load_default_catalog, render_tables
from nnembed.errors import DecodingError, EmbedError, NumericError
from nnembed.experiments import (
    SweepSpec,
    paper_calibration,
    run_sweep,
    solve_embedding,
    write_results,
)
from nnembed.oracle import MAX_ORACLE_DEVICES, REDUCED_TOPOLOGY, embedding_case, milp_case, oracle_problems
from nnembed.request import NNRequest, RequestConfig, build_request, validate_request
from nnembed.solver.mip import SolverConfig
from nnembed.topology import MEDIUM_KBPS, PhysicalTopology, Restriction, TopologyConfig, build_topology, validate_topology

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4
EXIT_VERIFY = 5

SOLVE_GAP = 0.01
DEFAULT_ORACLE_SEEDS = {"embedding": tuple(range(1, 21)), "milp": tuple(range(1, 51))}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    catalog_overrides: Mapping[str, float] = field(default_factory=dict)
    catalog_file: str | None = None
    topology: TopologyConfig = field(default_factory=lambda: paper_calibration()[0])
    request: RequestConfig = field(default_factory=lambda: paper_calibration()[1])
    sweep: SweepSpec = field(default_factory=SweepSpec)
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(gap_tol=SOLVE_GAP))
    output: str | None = None
    seed: int = 1

    def catalog(self) -> DeviceCatalog:
        if self.catalog_file is None:
            return load_default_catalog(capacity_overrides=self.catalog_overrides)
        cat = DeviceCatalog.from_json(Path(self.catalog_file).read_text())
        if self.catalog_overrides:
            unknown = sorted(set(self.catalog_overrides) - set(cat.network))
            if unknown:
                raise UsageError(f"capacity override for unknown device class: {', '.join(unknown)}")
            network = {
                k: replace(p, bitrate_capacity=float(self.catalog_overrides.get(k, p.bitrate_capacity)))
                for k, p in cat.network.items()
            }
            cat = replace(cat, network=network)
        return cat

    def seeded_topology(self) -> TopologyConfig:
        return replace(self.topology, seed=self.seed)

    def seeded_request(self) -> RequestConfig:
        return replace(self.request, seed=self.seed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "catalog_overrides": dict(sorted(self.catalog_overrides.items())),
            "catalog_file": self.catalog_file,
            "topology": self.topology.to_dict(),
            "request": self.request.to_dict(),
            "sweep": self.sweep.to_dict(),
            "solver": self.solver.to_dict(),
            "output": self.output,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "RunConfig":
        extra = set(doc) - set(cls.__dataclass_fields__)
        if extra:
            raise UsageError(f"unknown run config fields: {sorted(extra)}")
        base = cls()
        return cls(
            catalog_overrides=dict(doc.get("catalog_overrides", {})),
            catalog_file=doc.get("catalog_file"),
            topology=TopologyConfig.from_dict(doc["topology"]) if "topology" in doc else base.topology,
            request=RequestConfig.from_dict(doc["request"]) if "request" in doc else base.request,
            sweep=SweepSpec.from_dict(doc["sweep"]) if "sweep" in doc else base.sweep,
            solver=SolverConfig.from_dict(doc["solver"]) if "solver" in doc else base.solver,
            output=doc.get("output"),
            seed=int(doc.get("seed", 1)),
        )


# ----------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed_list(text: str) -> list[int]:
    """``1,2,5`` or a range ``1-20``."""
    if "-" in text and "," not in text:
        lo, _, hi = text.partition("-")
        try:
            return list(range(int(lo), int(hi) + 1))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed range {text!r}") from None
    return _ints(text)


def _assignment(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=KBPS, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number after '=', got {text!r}") from None


def _common(p: argparse.ArgumentParser, topology: bool = True, request: bool = True) -> None:
    p.add_argument("--config", help="RunConfig JSON; flags below override its fields")
    p.add_argument("--seed", type=int, help="topology and request seed")
    p.add_argument("--catalog", dest="catalog_file", help="catalog JSON replacing the built-in tables")
    p.add_argument(
        "--device-capacity", action="append", type=_assignment, metavar="KIND=KBPS", help="network device bitrate override"
    )
    if topology:
        g = p.add_argument_group("topology")
        g.add_argument("--networks", type=int)
        g.add_argument("--devices-per-network", type=int)
        g.add_argument("--relays-per-network", type=int)
        g.add_argument("--area-side", type=float)
        g.add_argument("--zigbee-range", type=float)
        g.add_argument("--cloud-servers", type=int)
        g.add_argument("--link-capacity", action="append", type=_assignment, metavar="MEDIUM=KBPS")
    if request:
        g = p.add_argument_group("request")
        g.add_argument("--layer-sizes", type=_ints, help="input,hidden,output counts")
        g.add_argument("--demand", type=float, dest="demand_fraction", help="demand as a fraction of the reference capacity")
        g.add_argument("--reference-capacity", type=float)
        g.add_argument("--traffic", type=float, help="kbps per virtual and anchor link")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--gap", type=float, dest="gap_tol", help="relative gap tolerance")
    g.add_argument("--time-limit", type=float)
    g.add_argument("--node-limit", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnembed", description="Energy-aware neural-network embedding.")
    sub = parser.add_subparsers(dest="command", required=True)

    cat = sub.add_parser("catalog", help="device power tables")
    cat_sub = cat.add_subparsers(dest="action", required=True)
    dump = cat_sub.add_parser("dump", help="print the device tables and the slope check")
    _common(dump, topology=False, request=False)
    dump.add_argument("--json", action="store_true", help="print the catalog document instead")
    dump.add_argument("--out", help="also write to this file")
    dump.add_argument("--force", action="store_true")

    topo = sub.add_parser("topology", help="generate a physical topology")
    _common(topo, request=False)
    topo.add_argument("--out", required=True, help="topology JSON file")
    topo.add_argument("--edge-list", help="also write a plain-text edge list")
    topo.add_argument("--force", action="store_true")

    req = sub.add_parser("request", help="generate a neural-network request")
    _common(req)
    req.add_argument("--topology", dest="topology_file", help="topology JSON to anchor against")
    req.add_argument("--out", required=True, help="request JSON file")
    req.add_argument("--force", action="store_true")

    solve = sub.add_parser("solve", help="embed one request")
    _common(solve)
    _solver_flags(solve)
    solve.add_argument("--variant", default="optimal", choices=[r.value for r in Restriction])
    solve.add_argument("--delta", type=float, default=0.01)
    solve.add_argument("--topology", dest="topology_file")
    solve.add_argument("--request", dest="request_file")
    solve.add_argument("--out", help="output directory (default solve-out)")
    solve.add_argument("--force", action="store_true")

    sweep = sub.add_parser("sweep", help="scenario sweep with savings against the cloud")
    _common(sweep)
    _solver_flags(sweep)
    sweep.add_argument("--deltas", type=_floats)
    sweep.add_argument("--demands", type=_floats)
    sweep.add_argument("--variants", type=lambda t: [v for v in t.split(",") if v])
    sweep.add_argument("--seeds", type=_seed_list)
    sweep.add_argument("--plot-data", action="store_true", help="also write per-delta plotting tables")
    sweep.add_argument("--out", help="output directory (default results)")
    sweep.add_argument("--force", action="store_true")
    sweep.add_argument("--quiet", action="store_true", help="no per-row progress")

    orc = sub.add_parser("oracle", help="check the solver against exhaustive enumeration")
    _common(orc)
    orc.add_argument("--kind", choices=("embedding", "milp"), default="embedding")
    orc.add_argument("--seeds", type=_seed_list)
    orc.add_argument("--out", help="directory for report.json and the effective config")
    orc.add_argument("--force", action="store_true")

    val = sub.add_parser("validate", help="check a config and, optionally, topology and request files")
    _common(val)
    val.add_argument("--topology", dest="topology_file")
    val.add_argument("--request", dest="request_file")
    return parser


_TOPOLOGY_FLAGS = ("networks", "devices_per_network", "relays_per_network", "area_side", "zigbee_range", "cloud_servers")
_REQUEST_FLAGS = ("demand_fraction", "reference_capacity", "traffic")
_SOLVER_FLAGS = ("gap_tol", "time_limit", "node_limit")


def resolve_config(args: argparse.Namespace, base: RunConfig | None = None) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        cfg = RunConfig.from_dict(doc)
    else:
        cfg = base or RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "catalog_file", None):
        cfg.catalog_file = args.catalog_file
    if getattr(args, "device_capacity", None):
        cfg.catalog_overrides = {**cfg.catalog_overrides, **dict(args.device_capacity)}
    topo = {k: getattr(args, k) for k in _TOPOLOGY_FLAGS if getattr(args, k, None) is not None}
    if getattr(args, "link_capacity", None):
        unknown = sorted({m for m, _ in args.link_capacity} - set(MEDIUM_KBPS))
        if unknown:
            raise UsageError(f"unknown medium: {', '.join(unknown)}")
        topo["capacity_overrides"] = {**cfg.topology.capacity_overrides, **dict(args.link_capacity)}
    if topo:
        cfg.topology = replace(cfg.topology, **topo)
    req = {k: getattr(args, k) for k in _REQUEST_FLAGS if getattr(args, k, None) is not None}
    if getattr(args, "layer_sizes", None) is not None:
        req["layer_sizes"] = tuple(args.layer_sizes)
    if req:
        cfg.request = replace(cfg.request, **req)
    solver = {k: getattr(args, k) for k in _SOLVER_FLAGS if getattr(args, k, None) is not None}
    if solver:
        cfg.solver = replace(cfg.solver, **solver)
        cfg.sweep = replace(cfg.sweep, solver=replace(cfg.sweep.solver, **solver))
    sweep = {}
    for flag, name in (("deltas", "deltas"), ("demands", "demand_fractions"), ("variants", "variants"), ("seeds", "seeds")):
        if getattr(args, flag, None) is not None:
            sweep[name] = getattr(args, flag)
    if sweep and args.command == "sweep":
        cfg.sweep = replace(cfg.sweep, **sweep)
    if getattr(args, "out", None):
        cfg.output = args.out
    return cfg


# ----------------------------------------------------------------------
# output helpers


def _claim_file(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise UsageError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)


def _claim_dir(path: Path, force: bool) -> None:
    if path.exists() and (not path.is_dir() or any(path.iterdir())) and not force:
        raise UsageError(f"output directory {path} is not empty; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)


def _config_path(out: Path) -> Path:
    return out.with_name(out.stem + ".config.json")


def _load_topology(args, cfg: RunConfig, catalog: DeviceCatalog) -> PhysicalTopology:
    if getattr(args, "topology_file", None):
        topo = PhysicalTopology.from_json(Path(args.topology_file).read_text())
        problems = validate_topology(topo, catalog)
        if problems:
            raise UsageError("invalid topology: " + "; ".join(problems))
        return topo
    return build_topology(cfg.seeded_topology(), catalog)


def _load_request(args, cfg: RunConfig, topo: PhysicalTopology) -> NNRequest:
    if getattr(args, "request_file", None):
        req = NNRequest.from_json(Path(args.request_file).read_text())
        problems = validate_request(req, topo)
        if problems:
            raise UsageError("invalid request: " + "; ".join(problems))
        if getattr(args, "demand_fraction", None) is not None:
            req = req.with_demand_fraction(args.demand_fraction, cfg.request.reference_capacity)
        return req
    return build_request(cfg.seeded_request(), topo)


# ----------------------------------------------------------------------
# commands


def cmd_catalog(args, cfg: RunConfig) -> int:
    catalog = cfg.catalog()
    text = catalog.to_json() if args.json else render_tables(catalog)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        _claim_file(out, args.force)
        out.write_text(text)
    return EXIT_OK


def cmd_topology(args, cfg: RunConfig) -> int:
    catalog = cfg.catalog()
    out = Path(args.out)
    _claim_file(out, args.force)
    topo = build_topology(cfg.seeded_topology(), catalog)
    out.write_text(topo.to_json())
    _config_path(out).write_text(cfg.to_json())
    if args.edge_list:
        edges = Path(args.edge_list)
        _claim_file(edges, args.force)
        edges.write_text(topo.edge_list())
    procs = len(topo.processing_nodes)
    print(f"{len(topo.nodes)} nodes, {len(topo.links)} directed links, {procs} processing sites -> {out}")
    return EXIT_OK


def cmd_request(args, cfg: RunConfig) -> int:
    catalog = cfg.catalog()
    out = Path(args.out)
    _claim_file(out, args.force)
    topo = _load_topology(args, cfg, catalog)
    req = build_request(cfg.seeded_request(), topo)
    out.write_text(req.to_json())
    _config_path(out).write_text(cfg.to_json())
    print(f"{len(req.nodes)} virtual nodes, {len(req.commodities())} commodities -> {out}")
    return EXIT_OK


def cmd_solve(args, cfg: RunConfig) -> int:
    catalog = cfg.catalog()
    out = Path(cfg.output or "solve-out")
    _claim_dir(out, args.force)
    (out / "config.json").write_text(cfg.to_json())
    topo = _load_topology(args, cfg, catalog)
    req = _load_request(args, cfg, topo)
    outcome = solve_embedding(topo, req, args.variant, catalog, args.delta, cfg.solver)
    res = outcome.result
    report = {
        "variant": args.variant,
        "delta": args.delta,
        "status": outcome.status,
        "message": outcome.message,
        "objective": res.objective if res is not None and res.has_solution else None,
        "bound": res.bound if res is not None else None,
        "gap": res.gap if res is not None else None,
        "nodes": res.nodes if res is not None else None,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")
    print(f"variant {args.variant}, delta {args.delta:g}: {outcome.status}")
    if outcome.message:
        print(outcome.message)
    if outcome.embedding is None:
        return EXIT_INFEASIBLE if outcome.status == "infeasible" else (EXIT_VERIFY if outcome.status == "verification-failed" else EXIT_LIMIT)
    emb = outcome.embedding
    (out / "embedding.json").write_text(emb.to_json())
    print("placement:")
    for v, p in emb.placement.items():
        print(f"  {v} -> {p}")
    print("device power (W):")
    for dev, w in emb.power.devices.items():
        print(f"  {dev}\t{w:.6g}")
    print(f"processing {emb.power.processing:.6g} W, network {emb.power.network:.6g} W, total {emb.power.total:.6g} W")
    print(f"gap {res.gap:.3g}, {res.nodes} nodes, {res.wall_time:.1f} s -> {out}")
    return EXIT_OK if outcome.status == "optimal" else EXIT_LIMIT


def cmd_sweep(args, cfg: RunConfig) -> int:
    catalog = cfg.catalog()
    out = Path(cfg.output or "results")
    _claim_dir(out, args.force)
    (out / "config.json").write_text(cfg.to_json())

    def progress(row, done, total):
        if not args.quiet:
            print(
                f"[{done}/{total}] seed {row.seed} delta {row.delta:g} demand {row.demand_fraction:g} "
                f"{row.variant}: {row.status} {row.total_w:.6g} W ({row.wall_time:.1f} s)",
                file=sys.stderr,
                flush=True,
            )

    rows = run_sweep(cfg.sweep, cfg.topology, cfg.request, catalog, progress)
    write_results(rows, out, with_plot_data=args.plot_data)
    print(f"{len(rows)} rows -> {out / 'results.csv'}")
    if any(r.status == "verification-failed" for r in rows):
        return EXIT_VERIFY
    if any(r.status == "limit-reached" for r in rows):
        return EXIT_LIMIT
    return EXIT_OK


def cmd_oracle(args, cfg: RunConfig) -> int:
    catalog = cfg.catalog()
    seeds = args.seeds or DEFAULT_ORACLE_SEEDS[args.kind]
    if args.kind == "embedding":
        if cfg.topology.devices_per_network > MAX_ORACLE_DEVICES:
            raise UsageError(
                f"oracle refused: {cfg.topology.devices_per_network} devices per network exceed the cap of "
                f"{MAX_ORACLE_DEVICES}; use a reduced topology"
            )
        probe = build_topology(cfg.seeded_topology(), catalog)
        problems = oracle_problems(probe, build_request(cfg.seeded_request(), probe), catalog)
        if problems:
            raise UsageError("oracle refused: " + "; ".join(problems))
    out = Path(cfg.output) if cfg.output else None
    if out is not None:
        _claim_dir(out, args.force)
        (out / "config.json").write_text(cfg.to_json())
    cases = []
    for seed in seeds:
        if args.kind == "embedding":
            case = embedding_case(seed, cfg.topology, cfg.request, catalog)
        else:
            case = milp_case(seed)
        cases.append(case)
        verdict = "agree" if case.agrees else "DISAGREE"
        print(f"seed {seed}: {case.label}: pipeline {case.pipeline:.10g} oracle {case.oracle:.10g} {verdict}", flush=True)
    bad = [c for c in cases if not c.agrees]
    print(f"{len(cases) - len(bad)}/{len(cases)} agreements")
    if out is not None:
        doc = {"kind": args.kind, "cases": [c.to_dict() for c in cases], "agreements": len(cases) - len(bad)}
        (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    return EXIT_VERIFY if bad else EXIT_OK


def cmd_validate(args, cfg: RunConfig) -> int:
    catalog = cfg.catalog()
    problems = [f"catalog: {c}" for c in catalog.slope_report]
    notes = list(problems)
    topo = _load_topology(args, cfg, catalog)
    errors = [f"topology: {p}" for p in validate_topology(topo, catalog)]
    if not errors:
        req = _load_request(args, cfg, topo)
        errors += [f"request: {p}" for p in validate_request(req, topo)]
    for n in notes:
        print(f"note: {n}")
    for e in errors:
        print(f"error: {e}")
    if errors:
        return EXIT_USAGE
    print(f"ok: {len(topo.nodes)} nodes, config valid")
    return EXIT_OK


COMMANDS = {
    "catalog": cmd_catalog,
    "topology": cmd_topology,
    "request": cmd_request,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
    "validate": cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        base = None
        if args.command == "oracle" and not args.config:
            base = RunConfig()
            base.topology = replace(base.topology, **REDUCED_TOPOLOGY)
        cfg = resolve_config(args, base)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"nnembed: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, DecodingError) as exc:
        print(f"nnembed: verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (EmbedError, ValueError, OSError) as exc:
        print(f"nnembed: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
