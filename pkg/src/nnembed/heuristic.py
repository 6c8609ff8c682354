"""Feasible embeddings built directly in the domain, used as solver starts.

A placement is routed commodity by commodity along cheapest paths, where
entering a device costs its per-kbps charge times the commodity rate plus its
activation charge if nothing switched it on yet. Costs are read off the
model's objective coefficients so the estimate and the MILP agree on prices.
Local search then relocates or swaps single virtual nodes.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from typing import Iterable, Mapping, Sequence

import numpy as np

from nnembed.milp import MilpModel
from nnembed.model import HandleMap, polish
from nnembed.topology import PhysicalTopology, layer_of


class PlacementEvaluator:
    def __init__(self, model: MilpModel, handles: HandleMap, topology: PhysicalTopology) -> None:
        self.model = model
        self.h = handles
        self.topology = topology
        c = model.arrays().c
        self.c = c
        self.hosts = list(handles.hosts)
        self.vnodes = sorted({v for (v, _) in handles.placement}, key=_vorder)
        self.capacity = {p: _capacity(model, handles, p) for p in self.hosts}
        self.adj: dict[str, list[str]] = defaultdict(list)
        for link in topology.links:
            self.adj[link.src].append(link.dst)
        self.per_kbps = {n: c[col] for n, col in handles.throughput.items()}
        self.net_charge = {n: c[col] for n, col in handles.net_active.items()}
        self.iot_charge = {n: c[col] for n, col in handles.iot_active.items()}
        self.proc_charge = {p: c[col] for p, col in handles.proc_active.items()}
        self.layer = {p: layer_of(topology.node(p)) for p in self.hosts}

    # ------------------------------------------------------------------

    def feasible(self, placement: Mapping[str, str]) -> bool:
        if set(placement) != set(self.vnodes) or any(p not in self.capacity for p in placement.values()):
            return False
        load: dict[str, float] = defaultdict(float)
        for v, p in placement.items():
            load[p] += self.h.demand[v]
        if any(load[p] > self.capacity[p] * (1 + 1e-12) for p in load):
            return False
        needed = self.h.spread_layers
        return all(any(self.layer[p] == layer for p in placement.values()) for layer in needed)

    def _endpoint(self, end: tuple[str, str], placement: Mapping[str, str]) -> str:
        kind, name = end
        return name if kind == "physical" else self.topology.attachment[placement[name]]

    def route(self, placement: Mapping[str, str]) -> tuple[float, dict[str, list[str]]]:
        """Greedy sequential routing; returns (objective estimate, node path per commodity)."""
        on: set[str] = set()
        cost = 0.0
        for v, p in placement.items():
            cost += self.c[self.h.placement[(v, p)]]
        for p in set(placement.values()):
            cost += self.proc_charge.get(p, 0.0)
            if p in self.iot_charge:
                cost += self.iot_charge[p]
                on.add(p)
        net_on: set[str] = set()
        paths: dict[str, list[str]] = {}
        for k in self.h.commodities:
            src = self._endpoint(k.src, placement)
            dst = self._endpoint(k.dst, placement)
            if src == dst:
                paths[k.name] = [src]
                continue
            path, step = self._cheapest(src, dst, k.traffic, on, net_on)
            if path is None:
                return math.inf, {}
            paths[k.name] = path
            cost += step
            for n in path[1:]:
                net_on.add(n)
                if n in self.iot_charge:
                    on.add(n)
        return cost, paths

    def _enter_cost(self, n: str, rate: float, on: set[str], net_on: set[str]) -> float:
        w = self.per_kbps[n] * rate
        if n not in net_on:
            w += self.net_charge.get(n, 0.0)
        if n in self.iot_charge and n not in on:
            w += self.iot_charge[n]
        return w

    def _cheapest(self, src: str, dst: str, rate: float, on: set[str], net_on: set[str]):
        dist = {src: 0.0}
        prev: dict[str, str] = {}
        heap = [(0.0, src)]
        done: set[str] = set()
        while heap:
            d, n = heapq.heappop(heap)
            if n in done:
                continue
            done.add(n)
            if n == dst:
                break
            for nxt in self.adj[n]:
                nd = d + self._enter_cost(nxt, rate, on, net_on)
                if nd < dist.get(nxt, math.inf) - 1e-15:
                    dist[nxt] = nd
                    prev[nxt] = n
                    heapq.heappush(heap, (nd, nxt))
        if dst not in dist:
            return None, math.inf
        path = [dst]
        while path[-1] != src:
            path.append(prev[path[-1]])
        path.reverse()
        return path, dist[dst]

    def point(self, placement: Mapping[str, str], paths: Mapping[str, Sequence[str]]) -> np.ndarray:
        """Full model vector for a routed placement (activations minimal)."""
        x = np.zeros(self.model.num_vars)
        for v, p in placement.items():
            x[self.h.placement[(v, p)]] = 1.0
        for k in self.h.commodities:
            nodes = paths.get(k.name, [])
            for e in zip(nodes, nodes[1:]):
                x[self.h.flow[(k.name, e)]] += k.traffic
        return polish(self.model, self.h, x, self.topology)

    # ------------------------------------------------------------------

    def local_search(self, placement: dict[str, str], max_rounds: int = 20) -> tuple[float, dict[str, str], dict]:
        best = dict(placement)
        best_cost, best_paths = self.route(best)
        for _ in range(max_rounds):
            improved = False
            for cand in self._neighbours(best):
                if not self.feasible(cand):
                    continue
                cost, paths = self.route(cand)
                if cost < best_cost - 1e-12 * max(1.0, abs(best_cost)):
                    best, best_cost, best_paths = cand, cost, paths
                    improved = True
            if not improved:
                break
        return best_cost, best, best_paths

    def _neighbours(self, placement: Mapping[str, str]) -> Iterable[dict[str, str]]:
        for v in self.vnodes:
            for p in self.hosts:
                if p != placement[v]:
                    cand = dict(placement)
                    cand[v] = p
                    yield cand
        for i, v in enumerate(self.vnodes):
            for w in self.vnodes[i + 1 :]:
                if placement[v] != placement[w]:
                    cand = dict(placement)
                    cand[v], cand[w] = placement[w], placement[v]
                    yield cand

    def from_scores(self, score: Mapping[tuple[str, str], float]) -> dict[str, str] | None:
        """Greedy placement following descending scores, honouring capacity and layers."""
        order = sorted(score.items(), key=lambda kv: (-kv[1], _vorder(kv[0][0]), kv[0][1]))
        load: dict[str, float] = defaultdict(float)
        placement: dict[str, str] = {}
        for (v, p), _ in order:
            if v in placement:
                continue
            if load[p] + self.h.demand[v] <= self.capacity[p] * (1 + 1e-12):
                placement[v] = p
                load[p] += self.h.demand[v]
        if len(placement) != len(self.vnodes):
            return None
        return self._cover_layers(placement)

    def _cover_layers(self, placement: dict[str, str]) -> dict[str, str] | None:
        if self.feasible(placement):
            return placement
        for layer in self.h.spread_layers:
            if any(self.layer[p] == layer for p in placement.values()):
                continue
            best = None
            for v in self.vnodes:
                for p in self.hosts:
                    if self.layer[p] != layer:
                        continue
                    cand = dict(placement)
                    cand[v] = p
                    if self.feasible_capacity(cand) and all(
                        any(self.layer[q] == l for q in cand.values())
                        for l in self.h.spread_layers
                        if any(self.layer[q] == l for q in placement.values())
                    ):
                        cost, _ = self.route(cand)
                        if best is None or cost < best[0]:
                            best = (cost, cand)
            if best is None:
                return None
            placement = best[1]
        return placement if self.feasible(placement) else None

    def feasible_capacity(self, placement: Mapping[str, str]) -> bool:
        load: dict[str, float] = defaultdict(float)
        for v, p in placement.items():
            load[p] += self.h.demand[v]
        return all(load[p] <= self.capacity[p] * (1 + 1e-12) for p in load)

    def seeds(self) -> list[dict[str, str]]:
        """Start placements: everything packed around each host in turn."""
        out = []
        hop = self._hops()
        for p in self.hosts:
            ranked = sorted(self.hosts, key=lambda q: (hop[p].get(q, math.inf), q))
            load: dict[str, float] = defaultdict(float)
            placement: dict[str, str] = {}
            for v in self.vnodes:
                for q in ranked:
                    if load[q] + self.h.demand[v] <= self.capacity[q] * (1 + 1e-12):
                        placement[v] = q
                        load[q] += self.h.demand[v]
                        break
            if len(placement) == len(self.vnodes):
                fixed = self._cover_layers(placement)
                if fixed is not None:
                    out.append(fixed)
        return out

    def _hops(self) -> dict[str, dict[str, int]]:
        att = self.topology.attachment
        out = {}
        for p in self.hosts:
            start = att[p]
            dist = {start: 0}
            frontier = [start]
            while frontier:
                nxt = []
                for n in frontier:
                    for m in self.adj[n]:
                        if m not in dist:
                            dist[m] = dist[n] + 1
                            nxt.append(m)
                frontier = nxt
            out[p] = {q: dist.get(att[q], math.inf) for q in self.hosts}
        return out


def _vorder(v: str) -> tuple:
    for i, prefix in enumerate(("in", "hid", "out")):
        if v.startswith(prefix) and v[len(prefix) :].isdigit():
            return (i, int(v[len(prefix) :]), v)
    return (3, 0, v)


def _capacity(model: MilpModel, handles: HandleMap, p: str) -> float:
    col = handles.proc_active[p]
    for con in model.constraints:
        if con.name == f"proc_cap[{p}]":
            return -dict(zip(con.cols, con.coefs))[col]
    return math.inf


def heuristic_points(
    model: MilpModel,
    handles: HandleMap,
    topology: PhysicalTopology,
    lp_values=None,
    extra: Iterable[Mapping[str, str]] = (),
    keep: int = 3,
    packing: bool = True,
) -> list[np.ndarray]:
    """Feasible model points from packing seeds, LP guidance and local search."""
    ev = PlacementEvaluator(model, handles, topology)
    starts: list[dict[str, str]] = [dict(p) for p in extra if ev.feasible(p)]
    if lp_values is not None:
        score = {key: float(lp_values[col]) for key, col in handles.placement.items()}
        guided = ev.from_scores(score)
        if guided is not None:
            starts.append(guided)
    if packing:
        starts += ev.seeds()
    ranked = []
    seen = set()
    for s in starts:
        key = tuple(sorted(s.items()))
        if key in seen:
            continue
        seen.add(key)
        cost, _ = ev.route(s)
        ranked.append((cost, len(ranked), s))
    ranked.sort(key=lambda t: (t[0], t[1]))
    points = []
    for _, _, s in ranked[:keep]:
        cost, placement, paths = ev.local_search(s)
        if math.isfinite(cost):
            points.append(ev.point(placement, paths))
    return points
