"""Exhaustive oracle: try every binary assignment, solve the continuous rest.

Assignments are screened in vectorized blocks: the low binaries' row
activities are tabulated once and shifted for each value of the high ones.
Before any LP is solved, each assignment is screened with interval
arithmetic on the continuous columns' bounds; an assignment that fails the
screen has no feasible completion, so skipping it keeps the search exact.
A second screen skips assignments whose objective floor (binary part plus
the continuous part minimized over its box) cannot beat the incumbent; the
survivors are solved cheapest floor first, each LP re-optimizing from the
previous basis. Row duals of solved LPs give Lagrangian floors that are valid
for every assignment, so later candidates are checked against those as well
before their own LP is solved.
"""

from __future__ import annotations

import math
import time

import numpy as np
import scipy.sparse as sp

from nnembed.errors import ModelError
from nnembed.milp import MilpModel, ModelArrays
from nnembed.solver.lp import LpConfig, SimplexLP
from nnembed.solver.mip import MipResult

DEFAULT_CAP = 25
_LOW_BITS = 15
_PENDING = 1 << 20  # queued assignments before a settling round
_SETTLE = 256
_DUALS = 16  # Lagrangian floors kept
_CHUNK = 32


def _unbounded(state: dict, start: float) -> MipResult:
    return MipResult(
        "limit-reached", None, -math.inf, -math.inf, math.inf, state["solved"], time.perf_counter() - start, state["iterations"]
    )


def _bits(codes: np.ndarray, k: int) -> np.ndarray:
    return ((codes[:, None] >> np.arange(k, dtype=np.int64)) & 1).astype(float)


def enumerate_exact(
    model: MilpModel, cap: int = DEFAULT_CAP, lp_config: LpConfig | None = None, tolerance: float = 1e-9
) -> MipResult:
    start = time.perf_counter()
    arrays = model.arrays()
    int_idx = np.flatnonzero(arrays.integral)
    k = len(int_idx)
    if k > cap:
        raise ModelError(f"enumeration refused: {k} integral variables exceed the cap of {cap}")
    for j in int_idx:
        if arrays.lb[j] < 0 or arrays.ub[j] > 1:
            raise ModelError(f"enumeration needs binary variables; {model.variables[j].name} is not")
    cont_idx = np.flatnonzero(~arrays.integral)
    A = arrays.A.toarray()
    A_int = A[:, int_idx]
    A_cont = A[:, cont_idx]
    row_lo = np.where(arrays.sense >= 0, arrays.rhs, -np.inf)
    row_hi = np.where(arrays.sense <= 0, arrays.rhs, np.inf)
    c_lb = arrays.lb[cont_idx]
    c_ub = arrays.ub[cont_idx]
    with np.errstate(invalid="ignore"):
        # range of the continuous part of each row over the continuous box
        cont_min = np.where(A_cont > 0, A_cont * c_lb, A_cont * c_ub)
        cont_max = np.where(A_cont > 0, A_cont * c_ub, A_cont * c_lb)
        cont_min = np.where(A_cont == 0, 0.0, cont_min).sum(axis=1) if A_cont.size else np.zeros(len(row_lo))
        cont_max = np.where(A_cont == 0, 0.0, cont_max).sum(axis=1) if A_cont.size else np.zeros(len(row_lo))
    slack = tolerance * np.maximum(1.0, np.abs(arrays.rhs))
    fixed_lo = arrays.lb[int_idx]
    fixed_hi = arrays.ub[int_idx]
    c_int = arrays.c[int_idx]
    c_cont = arrays.c[cont_idx]
    with np.errstate(invalid="ignore"):
        cont_floor = float(np.where(c_cont > 0, c_cont * c_lb, np.where(c_cont < 0, c_cont * c_ub, 0.0)).sum())
    cont_floor += arrays.obj_offset

    # continuous remainder: rows touching continuous columns, with the binary
    # part of each row carried by a fixed shift column
    rows = np.flatnonzero(np.any(A_cont != 0, axis=1))
    nc = len(cont_idx)
    lp = None
    # columns no row mentions sit at whichever bound their cost prefers
    free_x = np.where(c_cont > 0, c_lb, np.where(c_cont < 0, c_ub, np.clip(0.0, c_lb, c_ub)))
    free_obj = cont_floor - arrays.obj_offset
    if nc and len(rows):
        sub = ModelArrays(
            c=np.concatenate([c_cont, np.zeros(len(rows))]),
            A=sp.csr_matrix(np.hstack([A_cont[rows], np.eye(len(rows))])),
            sense=arrays.sense[rows],
            rhs=arrays.rhs[rows],
            lb=np.concatenate([c_lb, np.zeros(len(rows))]),
            ub=np.concatenate([c_ub, np.zeros(len(rows))]),
            integral=np.zeros(nc + len(rows), dtype=bool),
            obj_offset=0.0,
        )
        lp = SimplexLP(sub, lp_config)
        sub_lb, sub_ub = sub.lb.copy(), sub.ub.copy()
    state = {"obj": math.inf, "x": None, "basis": None, "solved": 0, "iterations": 0}
    # each floor is linear in z: lag_w @ z + lag_k
    lag_w = np.zeros((0, k))
    lag_k = np.zeros(0)

    def add_floor(reduced_costs: np.ndarray) -> None:
        nonlocal lag_w, lag_k
        # the shift columns are unit columns with zero cost, so their reduced costs are minus the row duals
        y = -reduced_costs[nc:]
        sense = arrays.sense[rows]
        y = np.where(sense > 0, np.maximum(y, 0.0), np.where(sense < 0, np.minimum(y, 0.0), y))
        red = c_cont - A_cont[rows].T @ y
        with np.errstate(invalid="ignore"):
            box = np.where(red > 0, red * c_lb, np.where(red < 0, red * c_ub, 0.0)).sum()
        if not math.isfinite(box):
            return
        w = c_int - y @ A_int[rows]
        lag_w = np.vstack([w, lag_w])[:_DUALS]
        lag_k = np.concatenate([[float(y @ arrays.rhs[rows]) + box + arrays.obj_offset], lag_k])[:_DUALS]

    def cutoff() -> float:
        best = state["obj"]
        return best - 1e-12 * max(1.0, abs(best)) if math.isfinite(best) else math.inf

    def solve_in_order(codes: np.ndarray, floor: np.ndarray, limit: int | None = None) -> bool:
        """Solve candidates cheapest floor first; False when the LP is unbounded."""
        order = np.argsort(floor, kind="stable")[:limit]
        for at in range(0, len(order), _CHUNK):
            chunk = order[at : at + _CHUNK]
            if floor[chunk[0]] >= cutoff():
                break
            zs = _bits(codes[chunk], k)
            lag = (zs @ lag_w.T + lag_k).max(axis=1) if len(lag_k) else np.full(len(chunk), -np.inf)
            for i, z, bound in zip(chunk, zs, lag):
                if floor[i] >= cutoff():
                    return True
                best = state["obj"]
                if math.isfinite(best) and bound >= best + 1e-9 * max(1.0, abs(best)):
                    continue
                if not solve_one(z):
                    return False
        return True

    def solve_one(z: np.ndarray) -> bool:
        """Solve one assignment's remainder; False when the LP is unbounded."""
        shift = A_int[rows] @ z
        sub_lb[nc:] = shift
        sub_ub[nc:] = shift
        sol = lp.solve(sub_lb, sub_ub, state["basis"])
        state["solved"] += 1
        state["iterations"] += sol.iterations
        if sol.basis is not None:
            state["basis"] = sol.basis
        if sol.status == "unbounded":
            return False
        if not sol.optimal:
            return True
        add_floor(sol.reduced_costs)
        obj = sol.objective + float(c_int @ z) + arrays.obj_offset
        if obj < cutoff():
            full = np.zeros(model.num_vars)
            full[int_idx] = z
            full[cont_idx] = sol.values[:nc]
            state["obj"], state["x"] = obj, full
        return True

    # low bits: row activity, objective and bound fit precomputed once; each
    # value of the high bits then shifts these by a constant vector
    low = min(k, _LOW_BITS)
    low_codes = np.arange(1 << low, dtype=np.int64)
    z_low = _bits(low_codes, low)
    act_low = z_low @ A_int[:, :low].T if k else np.zeros((1, len(row_lo)))
    obj_low = z_low @ c_int[:low]
    fit_low = np.all((z_low >= fixed_lo[:low] - 1e-12) & (z_low <= fixed_hi[:low] + 1e-12), axis=1)
    A_high = A_int[:, low:]
    pending_codes = np.zeros(0, dtype=np.int64)
    pending_floor = np.zeros(0)
    for high in range(1 << (k - low)):
        z_high = _bits(np.array([high], dtype=np.int64), k - low)[0]
        if np.any((z_high < fixed_lo[low:] - 1e-12) | (z_high > fixed_hi[low:] + 1e-12)):
            continue
        act = act_low + A_high @ z_high
        keep = fit_low & np.all(act + cont_max >= row_lo - slack, axis=1) & np.all(act + cont_min <= row_hi + slack, axis=1)
        if not keep.any():
            continue
        codes = (high << low) | low_codes
        obj = obj_low + float(c_int[low:] @ z_high)
        if lp is None:
            obj = np.where(keep, obj + free_obj + arrays.obj_offset, np.inf)
            state["solved"] += int(keep.sum())
            i = int(np.argmin(obj))
            if obj[i] < cutoff():
                state["obj"], state["x"] = float(obj[i]), _bits(codes[i : i + 1], k)[0]
            continue
        # no completion can cost less than its floor, so weak assignments skip their LP
        floor = obj + cont_floor
        mask = keep & (floor < cutoff())
        pending_codes = np.concatenate([pending_codes, codes[mask]])
        pending_floor = np.concatenate([pending_floor, floor[mask]])
        if len(pending_codes) > _PENDING:
            # settle the most promising ones to get an incumbent that prunes the rest
            if not solve_in_order(pending_codes, pending_floor, _SETTLE):
                return _unbounded(state, start)
            order = np.argsort(pending_floor, kind="stable")
            alive = np.ones(len(pending_codes), dtype=bool)
            alive[order[:_SETTLE]] = False
            alive &= pending_floor < cutoff()
            pending_codes, pending_floor = pending_codes[alive], pending_floor[alive]
    if lp is not None and not solve_in_order(pending_codes, pending_floor):
        return _unbounded(state, start)
    best_obj, best_x = state["obj"], state["x"]
    solved, iterations = state["solved"], state["iterations"]
    wall = time.perf_counter() - start
    if best_x is None:
        return MipResult("infeasible", None, math.inf, math.inf, math.inf, solved, wall, iterations)
    if lp is None:
        if not math.isfinite(free_obj):
            return _unbounded(state, start)
        values = np.zeros(model.num_vars)
        values[int_idx] = best_x
        values[cont_idx] = free_x
        best_x = values
    return MipResult("optimal", best_x, best_obj, best_obj, 0.0, solved, wall, iterations)
