"""LP-based branch-and-bound for binary mixed-integer programs.

Search order is best-bound with depth-first dives: after a node is branched
the child on the side its LP value leans towards is solved immediately, and
the sibling waits in a heap keyed by its parent's bound. Children re-optimize
from the parent's basis with the dual simplex. Reduced-cost fixing tightens
bounds in a subtree once an incumbent exists; no cuts are generated.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from nnembed.errors import ModelError
from nnembed.milp import MilpModel
from nnembed.solver.lp import Basis, LpConfig, SimplexLP
from nnembed.solver.verify import verify


@dataclass
class SolverConfig:
    gap_tol: float = 1e-6
    feasibility_tol: float = 1e-9
    integrality_tol: float = 1e-6
    node_limit: int | None = None
    time_limit: float | None = None
    branching: str = "most-fractional"
    dive: bool = True
    reduced_cost_fixing: bool = True
    lp: LpConfig = field(default_factory=LpConfig)

    def __post_init__(self) -> None:
        if not (self.gap_tol > 0 and self.feasibility_tol > 0 and self.integrality_tol > 0):
            raise ValueError("solver tolerances must be positive")
        if self.branching not in ("most-fractional",):
            raise ValueError(f"unknown branching rule {self.branching!r}")

    def to_dict(self) -> dict:
        return {
            "gap_tol": self.gap_tol,
            "feasibility_tol": self.feasibility_tol,
            "integrality_tol": self.integrality_tol,
            "node_limit": self.node_limit,
            "time_limit": self.time_limit,
            "branching": self.branching,
            "dive": self.dive,
            "reduced_cost_fixing": self.reduced_cost_fixing,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SolverConfig":
        known = {k: v for k, v in doc.items() if k in cls.__dataclass_fields__ and k != "lp"}
        return cls(**known)


@dataclass
class MipResult:
    status: str  # optimal | feasible-with-gap | infeasible | limit-reached
    values: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int
    wall_time: float
    lp_iterations: int = 0
    bound_history: list[float] = field(default_factory=list, repr=False)
    incumbents: list[float] = field(default_factory=list, repr=False)

    @property
    def has_solution(self) -> bool:
        return self.values is not None


def relative_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, (incumbent - bound) / max(abs(incumbent), 1.0))


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    basis: Basis | None = field(compare=False, default=None)
    depth: int = field(compare=False, default=0)


class BranchAndBound:
    def __init__(
        self,
        model: MilpModel,
        config: SolverConfig | None = None,
        progress: Callable[[dict], None] | None = None,
        heuristic: Callable[[np.ndarray], list] | None = None,
        heuristic_every: int = 200,
    ) -> None:
        self.model = model
        self.heuristic = heuristic
        self.heuristic_every = heuristic_every
        self.cfg = config or SolverConfig()
        arrays = model.arrays()
        self.arrays = arrays
        self.int_idx = np.flatnonzero(arrays.integral)
        for j in self.int_idx:
            lo, hi = arrays.lb[j], arrays.ub[j]
            if lo < 0 or hi > 1 or lo != math.floor(lo) or hi != math.floor(hi):
                raise ModelError(f"integral variable {model.variables[j].name} is not binary")
        self.lp = SimplexLP(arrays, self.cfg.lp)
        self.progress = progress
        self.incumbent: np.ndarray | None = None
        self.inc_obj = math.inf
        self.nodes = 0
        self.lp_iterations = 0
        self.bound_history: list[float] = []
        self.incumbent_history: list[float] = []
        self._seq = 0
        self._best_bound = -math.inf
        self._pruned_floor = math.inf

    # ------------------------------------------------------------------

    def _abs_tol(self) -> float:
        return self.cfg.gap_tol * max(abs(self.inc_obj), 1.0)

    def _prunable(self, bound: float) -> bool:
        if bound >= self.inc_obj - self._abs_tol():
            # discarded within the gap tolerance: its bound still limits the global one
            if bound < self.inc_obj:
                self._pruned_floor = min(self._pruned_floor, bound)
            return True
        return False

    def offer(self, values) -> bool:
        """Try a candidate point as incumbent; rejects points that fail verification."""
        x = np.array(values, dtype=float)
        x[self.int_idx] = np.round(x[self.int_idx])
        x = self._clean_continuous(x)
        if x is None:
            return False
        report = verify(self.model, x, self.cfg.feasibility_tol, self.cfg.integrality_tol)
        if not report.ok:
            return False
        if report.objective < self.inc_obj - 1e-12 * max(1.0, abs(report.objective)):
            self.incumbent = x
            self.inc_obj = report.objective
            self.incumbent_history.append(report.objective)
            return True
        return False

    def _clean_continuous(self, x: np.ndarray) -> np.ndarray | None:
        """Re-solve the continuous part with the integer part fixed."""
        if len(self.int_idx) == len(x):
            return x
        lb = self.arrays.lb.copy()
        ub = self.arrays.ub.copy()
        lb[self.int_idx] = x[self.int_idx]
        ub[self.int_idx] = x[self.int_idx]
        sol = self.lp.solve(lb, ub)
        self.lp_iterations += sol.iterations
        if not sol.optimal:
            return None
        out = sol.values.copy()
        out[self.int_idx] = x[self.int_idx]
        return out

    def _fractional(self, x: np.ndarray) -> int:
        vals = x[self.int_idx]
        frac = np.abs(vals - np.round(vals))
        tol = self.cfg.integrality_tol
        if not np.any(frac > tol):
            return -1
        # most fractional, lowest index on ties (argmax returns the first)
        score = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
        score = np.where(frac > tol, score, -1.0)
        return int(self.int_idx[int(np.argmax(np.round(score, 12)))])

    def _record_bound(self, value: float) -> None:
        self._best_bound = max(self._best_bound, value)
        self.bound_history.append(self._best_bound)

    # ------------------------------------------------------------------

    def run(self) -> MipResult:
        start = time.perf_counter()
        cfg = self.cfg
        root = _Node(-math.inf, 0, self.arrays.lb.copy(), self.arrays.ub.copy())
        heap: list[_Node] = []
        stack: list[_Node] = [root]
        limit_hit = False
        while stack or heap:
            if cfg.node_limit is not None and self.nodes >= cfg.node_limit:
                limit_hit = True
                break
            if cfg.time_limit is not None and time.perf_counter() - start > cfg.time_limit:
                limit_hit = True
                break
            if stack:
                node = stack.pop()
            else:
                node = heapq.heappop(heap)
            if self._prunable(node.bound):
                continue
            self.nodes += 1
            cutoff = self.inc_obj - self._abs_tol() if math.isfinite(self.inc_obj) else None
            sol = self.lp.solve(node.lb, node.ub, node.basis, cutoff=cutoff)
            self.lp_iterations += sol.iterations
            if sol.status == "unbounded":
                if self.nodes == 1:
                    return self._result("limit-reached" if self.incumbent is None else "feasible-with-gap", start, -math.inf)
                continue
            if sol.status == "iteration-limit":
                # keep the node alive under its parent's bound rather than losing it
                limit_hit = True
                break
            if not sol.optimal:
                if sol.status == "cutoff":
                    self._prunable(max(sol.objective, node.bound))
                self._update_bound(heap, stack)
                continue
            bound = max(sol.objective, node.bound)
            if self._prunable(bound):
                self._update_bound(heap, stack)
                continue
            x = sol.values
            j = self._fractional(x)
            if j >= 0 and self.heuristic is not None and (self.nodes - 1) % self.heuristic_every == 0:
                # primal heuristic guided by this node's relaxation
                for point in self.heuristic(x):
                    self.offer(point)
                if self._prunable(bound):
                    self._update_bound(heap, stack)
                    continue
            if j < 0:
                self.offer(x)
                self._update_bound(heap, stack)
                self._report(start, heap, stack)
                continue
            lb, ub = node.lb, node.ub
            if cfg.reduced_cost_fixing and math.isfinite(self.inc_obj) and sol.reduced_costs is not None:
                lb, ub = self._fix_by_reduced_cost(sol.objective, sol.reduced_costs, x, lb, ub)
            down_lb, down_ub = lb.copy(), ub.copy()
            down_ub[j] = math.floor(x[j])
            up_lb, up_ub = lb.copy(), ub.copy()
            up_lb[j] = math.ceil(x[j])
            down = self._child(bound, down_lb, down_ub, sol.basis, node.depth + 1)
            up = self._child(bound, up_lb, up_ub, sol.basis, node.depth + 1)
            first, second = (up, down) if x[j] - math.floor(x[j]) >= 0.5 else (down, up)
            if cfg.dive:
                heapq.heappush(heap, second)
                stack.append(first)
            else:
                heapq.heappush(heap, first)
                heapq.heappush(heap, second)
            self._update_bound(heap, stack)
            if self.nodes % 10 == 0:
                self._report(start, heap, stack)
        open_bounds = [n.bound for n in heap] + [n.bound for n in stack]
        bound = min(open_bounds + [self._pruned_floor, self.inc_obj])
        if self.incumbent is not None:
            bound = min(max(bound, self._best_bound), self.inc_obj)
        if math.isfinite(bound):
            self._record_bound(bound)
        if self.incumbent is None:
            status = "limit-reached" if limit_hit else "infeasible"
        else:
            gap = relative_gap(self.inc_obj, bound)
            status = "optimal" if gap <= cfg.gap_tol else "feasible-with-gap"
        return self._result(status, start, bound)

    def _child(self, bound, lb, ub, basis, depth) -> _Node:
        self._seq += 1
        return _Node(bound, self._seq, lb, ub, basis, depth)

    def _update_bound(self, heap: list[_Node], stack: list[_Node]) -> None:
        open_nodes = [n.bound for n in heap] + [n.bound for n in stack]
        if open_nodes:
            self._record_bound(min(min(open_nodes), self._pruned_floor, self.inc_obj))

    def _fix_by_reduced_cost(self, obj, d, x, lb, ub):
        slack = self.inc_obj - self._abs_tol() - obj
        if slack < 0:
            return lb, ub
        idx = self.int_idx
        at_lo = (np.abs(x[idx] - lb[idx]) <= 1e-9) & (d[idx] > slack) & (ub[idx] > lb[idx])
        at_hi = (np.abs(x[idx] - ub[idx]) <= 1e-9) & (-d[idx] > slack) & (ub[idx] > lb[idx])
        if not (at_lo.any() or at_hi.any()):
            return lb, ub
        lb, ub = lb.copy(), ub.copy()
        ub[idx[at_lo]] = lb[idx[at_lo]]
        lb[idx[at_hi]] = ub[idx[at_hi]]
        return lb, ub

    def _report(self, start: float, heap, stack) -> None:
        if self.progress is None:
            return
        bound = self._best_bound
        self.progress(
            {
                "nodes": self.nodes,
                "incumbent": self.inc_obj,
                "bound": bound,
                "gap": relative_gap(self.inc_obj, bound),
                "open": len(heap) + len(stack),
                "seconds": time.perf_counter() - start,
            }
        )

    def _result(self, status: str, start: float, bound: float) -> MipResult:
        obj = self.inc_obj if self.incumbent is not None else math.inf
        gap = relative_gap(obj, bound) if self.incumbent is not None else math.inf
        return MipResult(
            status=status,
            values=None if self.incumbent is None else self.incumbent.copy(),
            objective=obj,
            bound=bound,
            gap=gap,
            nodes=self.nodes,
            wall_time=time.perf_counter() - start,
            lp_iterations=self.lp_iterations,
            bound_history=list(self.bound_history),
            incumbents=list(self.incumbent_history),
        )


def solve_mip(
    model: MilpModel,
    config: SolverConfig | None = None,
    initial=None,
    progress: Callable[[dict], None] | None = None,
    heuristic: Callable[[np.ndarray], list] | None = None,
) -> MipResult:
    """Branch-and-bound; ``initial`` optionally seeds the incumbent.

    ``heuristic`` maps a fractional LP point to candidate points; it runs at
    the root and periodically afterwards, and every candidate is verified.
    """
    bb = BranchAndBound(model, config, progress, heuristic)
    if initial is not None:
        for point in initial if isinstance(initial, (list, tuple)) and initial and hasattr(initial[0], "__len__") else [initial]:
            bb.offer(point)
    return bb.run()
