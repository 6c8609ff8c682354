"""Bounded revised simplex for the linear relaxations.

Every row ``i`` gets a logical variable ``r_i = A_i x`` whose bounds encode
the row sense, so the working system is ``[A  -I] z = 0`` with all variables
boxed (possibly with infinite upper sides). The all-logical basis is always
nonsingular, which gives a trivial starting point for the dual simplex.

The dual simplex with dual steepest-edge pricing does most of the work: a
cold start is made dual feasible by placing each nonbasic column on the bound
favoured by its cost (temporary artificial boxes cover costs that have no
finite favoured bound), and a warm start after a bound change is still dual
feasible, so branch-and-bound children re-optimize in a few pivots. A short
primal phase mops up any dual infeasibility left by round-off.

Dual degeneracy (many columns tied at zero reduced cost, typical of flow
variables) makes the dual simplex stall. Once a run of non-improving pivots
is seen, nonbasic costs are shifted by small deterministic amounts away from
their current bounds; the true costs are restored before the primal phase,
so reported optima and bounds always refer to the unperturbed problem.

The basis inverse is an LU factorization (SuperLU) followed by a product-form
eta file; the file is folded into a fresh factorization every
``refactor_every`` pivots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from nnembed.errors import NumericError
from nnembed.milp import MilpModel, ModelArrays

AT_LOWER, AT_UPPER, FREE_ZERO, BASIC = 0, 1, 2, 3


@dataclass
class LpConfig:
    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-9
    pivot_tol: float = 1e-7
    refactor_every: int = 64
    stall_threshold: int = 1000
    max_iterations: int = 200_000
    artificial_bound: float = 1e7
    perturbation: float = 1e-6
    scaling: bool = True
    perturb_after: int = 50
    trace: Callable[[dict], None] | None = None
    trace_every: int = 500


@dataclass
class Basis:
    """Restartable simplex state: basic column per row plus nonbasic positions."""

    head: np.ndarray
    status: np.ndarray
    weights: np.ndarray

    def copy(self) -> "Basis":
        return Basis(self.head.copy(), self.status.copy(), self.weights.copy())


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | iteration-limit
    values: np.ndarray | None
    objective: float
    iterations: int = 0
    reduced_costs: np.ndarray | None = None
    basis: Basis | None = field(default=None, repr=False)
    bland_engaged: bool = False

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Factor:
    """LU of the basis matrix plus a product-form eta file."""

    def __init__(self, B: sp.csc_matrix) -> None:
        self.lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        z = self.lu.solve(v)
        for r, col in self.etas:
            zr = z[r] / col[r]
            if zr != 0.0:
                z -= zr * col
            z[r] = zr
        return z

    def btran(self, v: np.ndarray) -> np.ndarray:
        z = np.array(v, dtype=float)
        for r, col in reversed(self.etas):
            z[r] = (z[r] - (col @ z - col[r] * z[r])) / col[r]
        return self.lu.solve(z, trans="T")

    def update(self, r: int, column: np.ndarray) -> None:
        self.etas.append((r, column))


class SimplexLP:
    """Reusable LP engine for one constraint matrix and objective.

    Bounds are supplied per call, which is what branch-and-bound needs: the
    matrix is factorized column-wise once and every node only changes bounds.
    """

    def __init__(self, arrays: ModelArrays, config: LpConfig | None = None) -> None:
        self.cfg = config or LpConfig()
        A = arrays.A.tocsc()
        A.sum_duplicates()
        self.m, self.n = A.shape
        # work on R A C with power-of-two factors; scaling by powers of two is exact
        self.row_factor, self.col_factor = _scale_factors(A) if self.cfg.scaling else (np.ones(self.m), np.ones(self.n))
        A = sp.diags(self.row_factor) @ A @ sp.diags(self.col_factor)
        A = A.tocsc()
        self.A_csc = A
        self.AT = A.T.tocsr()
        self.c_struct = np.asarray(arrays.c, dtype=float) * self.col_factor
        self.cost = np.concatenate([self.c_struct, np.zeros(self.m)])
        self.obj_offset = float(arrays.obj_offset)
        sense, rhs = arrays.sense, arrays.rhs
        self.row_lb = np.where(sense >= 0, rhs, -np.inf).astype(float) * self.row_factor
        self.row_ub = np.where(sense <= 0, rhs, np.inf).astype(float) * self.row_factor
        self.base_lb = np.asarray(arrays.lb, dtype=float) / self.col_factor
        self.base_ub = np.asarray(arrays.ub, dtype=float) / self.col_factor
        scale = np.abs(A).max(axis=0).toarray().ravel() if A.nnz else np.zeros(self.n)
        self._col_scale = np.maximum(scale, 1.0)
        # fixed pseudo-random magnitudes keep every solve reproducible
        jitter = np.random.default_rng(20240601).uniform(1.0, 2.0, self.n + self.m)
        self.perturb = self.cfg.perturbation * (1.0 + np.abs(self.cost)) * jitter

    # ------------------------------------------------------------------
    # column access

    def _column(self, j: int) -> np.ndarray:
        v = np.zeros(self.m)
        if j < self.n:
            lo, hi = self.A_csc.indptr[j], self.A_csc.indptr[j + 1]
            v[self.A_csc.indices[lo:hi]] = self.A_csc.data[lo:hi]
        else:
            v[j - self.n] = -1.0
        return v

    def _basis_matrix(self, head: np.ndarray) -> sp.csc_matrix:
        indptr = [0]
        indices: list[np.ndarray] = []
        data: list[np.ndarray] = []
        A = self.A_csc
        for j in head:
            if j < self.n:
                lo, hi = A.indptr[j], A.indptr[j + 1]
                indices.append(A.indices[lo:hi])
                data.append(A.data[lo:hi])
            else:
                indices.append(np.array([j - self.n]))
                data.append(np.array([-1.0]))
            indptr.append(indptr[-1] + len(indices[-1]))
        return sp.csc_matrix(
            (np.concatenate(data) if data else np.zeros(0), np.concatenate(indices) if indices else np.zeros(0, int), indptr),
            shape=(self.m, self.m),
        )

    def _row_alpha(self, rho: np.ndarray) -> np.ndarray:
        return np.concatenate([self.AT @ rho, -rho])

    def _times(self, z: np.ndarray) -> np.ndarray:
        """[A  -I] z."""
        return self.A_csc @ z[: self.n] - z[self.n :]

    # ------------------------------------------------------------------

    def solve(
        self,
        lb: np.ndarray | None = None,
        ub: np.ndarray | None = None,
        basis: Basis | None = None,
        iteration_limit: int | None = None,
        cutoff: float | None = None,
    ) -> LpSolution:
        """Minimize over the given structural bounds.

        ``cutoff`` lets the dual simplex stop early once its objective, which
        only increases, exceeds a known incumbent; the result is then reported
        as ``infeasible`` relative to the cutoff.
        """
        lb = None if lb is None else np.asarray(lb, dtype=float) / self.col_factor
        ub = None if ub is None else np.asarray(ub, dtype=float) / self.col_factor
        run = _Run(self, lb, ub, basis, iteration_limit or self.cfg.max_iterations, cutoff)
        sol = run.execute()
        if sol.values is not None:
            sol.values = sol.values * self.col_factor
        if sol.reduced_costs is not None:
            sol.reduced_costs = sol.reduced_costs / self.col_factor
        return sol


class _Run:
    def __init__(self, lp: SimplexLP, lb, ub, basis: Basis | None, limit: int, cutoff: float | None) -> None:
        self.lp = lp
        self.cfg = lp.cfg
        n, m = lp.n, lp.m
        s_lb = lp.base_lb if lb is None else np.asarray(lb, dtype=float)
        s_ub = lp.base_ub if ub is None else np.asarray(ub, dtype=float)
        self.true_lb = np.concatenate([s_lb, lp.row_lb])
        self.true_ub = np.concatenate([s_ub, lp.row_ub])
        self.lb = self.true_lb.copy()
        self.ub = self.true_ub.copy()
        self.limit = limit
        self.cutoff = cutoff
        self.iterations = 0
        self.bland = False
        self.bland_engaged = False
        self.N = n + m
        if basis is not None and len(basis.head) == m and len(basis.status) == self.N:
            self.head = basis.head.copy()
            self.status = basis.status.copy()
            self.weights = basis.weights.copy()
        else:
            self.head = np.arange(n, n + m)
            self.status = np.full(self.N, AT_LOWER, dtype=np.int8)
            self.status[self.head] = BASIC
            self.weights = np.ones(m)
        self.artificial = np.zeros(self.N, dtype=bool)
        self.M = self.cfg.artificial_bound
        self.cost = lp.cost
        self.perturbed = False
        self._cutoff_retry = 0

    # state -------------------------------------------------------------

    def _place_nonbasics(self) -> None:
        """Put every nonbasic column on a bound consistent with its state."""
        nb = self.status != BASIC
        lo_f = np.isfinite(self.lb)
        hi_f = np.isfinite(self.ub)
        st = self.status
        fix_lo = nb & (st == AT_LOWER) & ~lo_f
        st[fix_lo & hi_f] = AT_UPPER
        fix_hi = nb & (st == AT_UPPER) & ~hi_f
        st[fix_hi & lo_f] = AT_LOWER
        st[nb & ~lo_f & ~hi_f] = FREE_ZERO
        st[nb & (st == FREE_ZERO) & lo_f] = AT_LOWER
        st[nb & (st == FREE_ZERO) & hi_f & ~lo_f] = AT_UPPER
        x = np.zeros(self.N)
        x[nb & (st == AT_LOWER)] = self.lb[nb & (st == AT_LOWER)]
        x[nb & (st == AT_UPPER)] = self.ub[nb & (st == AT_UPPER)]
        self.x = x

    def _make_dual_feasible(self) -> None:
        """Flip nonbasics to their cost-favoured bound, boxing where needed."""
        d = self.d
        tol = self.cfg.optimality_tol
        nb = self.status != BASIC
        want_up = nb & (d < -tol)
        want_lo = nb & (d > tol)
        need_box_up = want_up & ~np.isfinite(self.ub)
        need_box_lo = want_lo & ~np.isfinite(self.lb)
        for idx in np.flatnonzero(need_box_up):
            base = self.lb[idx] if np.isfinite(self.lb[idx]) else 0.0
            self.ub[idx] = base + self.M * max(1.0, abs(base))
            self.artificial[idx] = True
        for idx in np.flatnonzero(need_box_lo):
            base = self.ub[idx] if np.isfinite(self.ub[idx]) else 0.0
            self.lb[idx] = base - self.M * max(1.0, abs(base))
            self.artificial[idx] = True
        self.status[want_up] = AT_UPPER
        self.status[want_lo] = AT_LOWER
        free = nb & (self.status == FREE_ZERO)
        if np.any(free & (np.abs(d) > tol)):
            for idx in np.flatnonzero(free & (np.abs(d) > tol)):
                if d[idx] < 0:
                    self.ub[idx] = self.M
                    self.status[idx] = AT_UPPER
                else:
                    self.lb[idx] = -self.M
                    self.status[idx] = AT_LOWER
                self.artificial[idx] = True

    def _refactor(self) -> None:
        try:
            self.factor = _Factor(self.lp._basis_matrix(self.head))
        except RuntimeError:
            self._fallback_basis()
            self.factor = _Factor(self.lp._basis_matrix(self.head))

    def _fallback_basis(self) -> None:
        n, m = self.lp.n, self.lp.m
        self._singular_count = getattr(self, "_singular_count", 0) + 1
        if self._singular_count > 5:
            raise NumericError("basis repeatedly singular; cannot recover", diagnostics={"iterations": self.iterations})
        self.status[self.head] = AT_LOWER
        self.head = np.arange(n, n + m)
        self.status[self.head] = BASIC
        self.weights = np.ones(m)

    def _recompute(self) -> None:
        """Fresh primal basics and reduced costs from the current factor."""
        x = self.x
        x[self.head] = 0.0
        rhs = -self.lp._times(x)
        x[self.head] = self.factor.ftran(rhs)
        y = self.factor.btran(self.cost[self.head])
        self.d = self.cost - np.concatenate([self.lp.AT @ y, -y])
        self.d[self.head] = 0.0

    def _objective(self) -> float:
        return float(self.lp.cost @ self.x) + self.lp.obj_offset

    def _working_objective(self) -> float:
        return float(self.cost @ self.x)

    def _perturb(self) -> None:
        """Shift nonbasic costs away from their resting bound; dual feasibility is kept."""
        if self.perturbed or self.cfg.perturbation <= 0:
            return
        nb = self.status != BASIC
        sign = np.zeros(self.N)
        sign[nb & (self.status == AT_LOWER)] = 1.0
        sign[nb & (self.status == AT_UPPER)] = -1.0
        sign[self.lb == self.ub] = 0.0
        shift = sign * self.lp.perturb
        self.cost = self.lp.cost + shift
        self.d = self.d + shift
        self.perturbed = True

    def _unperturb(self) -> None:
        if self.perturbed:
            self.cost = self.lp.cost
            self.perturbed = False
            self._recompute()

    def _cutoff_reached(self) -> bool:
        """Dual objective beyond the cutoff, judged with the true costs."""
        margin = 1e-9 * max(1.0, abs(self.cutoff))
        if self._objective() <= self.cutoff + margin:
            return False
        if not self.perturbed:
            return self._dual_feasible()
        if self.iterations < self._cutoff_retry:
            return False
        saved = self.cost
        self.cost = self.lp.cost
        self._recompute()
        if self._dual_feasible():
            self.perturbed = False
            return True
        self.cost = saved
        self._recompute()
        self._cutoff_retry = self.iterations + 50
        return False

    # main --------------------------------------------------------------

    def execute(self) -> LpSolution:
        if np.any(self.true_lb > self.true_ub + self.cfg.feasibility_tol):
            return LpSolution("infeasible", None, math.inf, 0)
        result = self._execute()
        if result.status != "numeric":
            return result
        # unverifiable infeasibility: start over from the slack basis
        lp = self.lp
        retry = _Run(lp, self.true_lb[: lp.n], self.true_ub[: lp.n], None, self.limit, self.cutoff)
        retry.iterations = self.iterations
        result = retry._execute()
        if result.status == "numeric":
            raise NumericError(
                "dual simplex lost accuracy twice; infeasibility could not be certified",
                diagnostics={"iterations": retry.iterations},
            )
        return result

    def _execute(self) -> LpSolution:
        self._place_nonbasics()
        self._refactor()
        self._recompute()
        for _ in range(4):
            self._make_dual_feasible()
            self._place_nonbasics()
            self._recompute()
            status = self._dual_phase()
            if status != "optimal":
                return self._finish(status)
            self._unperturb()
            status = self._primal_cleanup()
            if status == "unbounded":
                return self._finish("unbounded")
            if status != "optimal":
                return self._finish(status)
            verdict = self._check_artificial()
            if verdict == "optimal":
                return self._finish("optimal")
            if verdict == "unbounded":
                return self._finish("unbounded")
            self.M *= 1e4
        return self._finish("unbounded")

    def _check_artificial(self) -> str:
        if not self.artificial.any():
            return "optimal"
        tol = 1e-6
        at_art = self.artificial & (
            (np.abs(self.x - self.ub) <= tol * np.maximum(1, np.abs(self.ub)))
            | (np.abs(self.x - self.lb) <= tol * np.maximum(1, np.abs(self.lb)))
        )
        if not at_art.any():
            # release the artificial boxes; the point is optimal for the true bounds
            return "optimal"
        for j in np.flatnonzero(at_art & (self.status != BASIC)):
            if self._is_ray(j):
                return "unbounded"
        # enlarge the box and continue
        for j in np.flatnonzero(self.artificial):
            if np.isfinite(self.ub[j]) and not np.isfinite(self.true_ub[j]):
                self.ub[j] = (self.lb[j] if np.isfinite(self.lb[j]) else 0.0) + self.M * 1e4
            if np.isfinite(self.lb[j]) and not np.isfinite(self.true_lb[j]):
                self.lb[j] = (self.ub[j] if np.isfinite(self.true_ub[j]) else 0.0) - self.M * 1e4
        return "again"

    def _is_ray(self, j: int) -> bool:
        up = self.status[j] == AT_UPPER
        if (up and self.d[j] >= 0) or (not up and self.d[j] <= 0):
            return False
        alpha = self.factor.ftran(self.lp._column(j))
        direction = -alpha if up else alpha  # change of x_B per unit move of x_j
        for i, col in enumerate(self.head):
            dv = direction[i]
            if dv < -1e-12 and np.isfinite(self.true_lb[col]):
                return False
            if dv > 1e-12 and np.isfinite(self.true_ub[col]):
                return False
        return True

    def _finish(self, status: str) -> LpSolution:
        basis = Basis(self.head.copy(), self.status.copy(), self.weights.copy())
        if status == "optimal":
            xs = self.x[: self.lp.n].copy()
            return LpSolution(
                "optimal",
                xs,
                self._objective(),
                self.iterations,
                self.d[: self.lp.n].copy(),
                basis,
                self.bland_engaged,
            )
        if status == "cutoff":
            # the dual objective at the stop is still a valid lower bound
            return LpSolution("cutoff", None, self._objective(), self.iterations, None, basis, self.bland_engaged)
        obj = {"infeasible": math.inf, "unbounded": -math.inf}.get(status, math.nan)
        if status == "numeric":
            return LpSolution("numeric", None, obj, self.iterations, None, None, self.bland_engaged)
        return LpSolution(status, None, obj, self.iterations, None, basis, self.bland_engaged)

    # dual simplex ------------------------------------------------------

    def _primal_infeasibility(self) -> np.ndarray:
        xb = self.x[self.head]
        lo = self.lb[self.head]
        hi = self.ub[self.head]
        tol = self.cfg.feasibility_tol
        below = np.where(xb < lo - tol * np.maximum(1, np.abs(lo)), lo - xb, 0.0)
        above = np.where(xb > hi + tol * np.maximum(1, np.abs(hi)), xb - hi, 0.0)
        return below - above  # >0: below lower, <0: above upper

    def _dual_phase(self) -> str:
        cfg = self.cfg
        since_refactor = 0
        stall = 0
        last_obj = -math.inf
        while True:
            if self.iterations >= self.limit:
                return "iteration-limit"
            infeas = self._primal_infeasibility()
            if not np.any(infeas):
                return "optimal"
            if self.cutoff is not None and self._cutoff_reached():
                return "cutoff"
            # choose leaving row
            if self.bland:
                cand = np.flatnonzero(infeas)
                r = int(cand[np.argmin(self.head[cand])])
            else:
                score = infeas * infeas / self.weights
                r = int(np.argmax(score))
            leaving = int(self.head[r])
            below = infeas[r] > 0
            target = self.lb[leaving] if below else self.ub[leaving]
            rho = self.factor.btran(_unit(self.lp.m, r))
            alpha_r = self.lp._row_alpha(rho)
            q = self._dual_ratio(alpha_r, below)
            if q < 0:
                # refresh once before trusting an infeasibility certificate
                if since_refactor:
                    self._refactor()
                    self._recompute()
                    since_refactor = 0
                    continue
                if not self._certifies_infeasible(alpha_r):
                    return "numeric"
                return "infeasible"
            col_q = self.lp._column(q)
            alpha_q = self.factor.ftran(col_q)
            arq = alpha_q[r]
            if abs(arq - alpha_r[q]) > 1e-7 * max(1.0, abs(arq)) or abs(arq) < cfg.pivot_tol:
                if since_refactor:
                    self._refactor()
                    self._recompute()
                    since_refactor = 0
                    continue
            tau = self.factor.ftran(rho)
            self._pivot(r, q, alpha_q, alpha_r, target, below)
            self._update_weights(r, alpha_q, tau)
            self.iterations += 1
            since_refactor += 1
            obj = self._working_objective()
            if cfg.trace is not None and self.iterations % cfg.trace_every == 0:
                cfg.trace(
                    {
                        "phase": "dual",
                        "iterations": self.iterations,
                        "objective": obj,
                        "infeasibility": float(np.abs(infeas).sum()),
                        "pivot": float(arq),
                        "bland": self.bland,
                    }
                )
            if obj <= last_obj + 1e-12 * max(1.0, abs(obj)):
                stall += 1
                if stall == cfg.perturb_after:
                    self._perturb()
                if stall >= cfg.stall_threshold and not self.bland:
                    self.bland = True
                    self.bland_engaged = True
            else:
                stall = 0
                self.bland = False
            last_obj = max(last_obj, obj)
            if since_refactor >= cfg.refactor_every:
                self._refactor()
                self._recompute()
                since_refactor = 0
                if not self._dual_feasible():
                    self._repair_dual()

    def _certifies_infeasible(self, alpha_r: np.ndarray) -> bool:
        """Farkas check: the row combination cannot vanish on the true box."""
        a = np.where(np.abs(alpha_r) > 1e-12, alpha_r, 0.0)
        lo, hi = self.true_lb, self.true_ub
        nz = a != 0
        if np.any(nz & ~(np.isfinite(lo) & np.isfinite(hi))):
            pos_inf = nz & (((a > 0) & ~np.isfinite(hi)) | ((a < 0) & ~np.isfinite(lo)))
            neg_inf = nz & (((a > 0) & ~np.isfinite(lo)) | ((a < 0) & ~np.isfinite(hi)))
        else:
            pos_inf = neg_inf = np.zeros_like(nz)
        with np.errstate(invalid="ignore"):
            t1 = np.where(nz, a * lo, 0.0)
            t2 = np.where(nz, a * hi, 0.0)
        low = np.where(neg_inf, 0.0, np.minimum(t1, t2))
        high = np.where(pos_inf, 0.0, np.maximum(t1, t2))
        scale = np.abs(np.where(np.isfinite(low), low, 0.0)).sum() + np.abs(np.where(np.isfinite(high), high, 0.0)).sum()
        slack = 1e-7 * max(1.0, scale)
        if not pos_inf.any() and high[nz].sum() < -slack:
            return True
        if not neg_inf.any() and low[nz].sum() > slack:
            return True
        return False

    def _dual_feasible(self) -> bool:
        tol = self.cfg.optimality_tol * 10
        st, d = self.status, self.d
        bad = ((st == AT_LOWER) & (d < -tol) & (self.ub > self.lb)) | (
            (st == AT_UPPER) & (d > tol) & (self.ub > self.lb)
        ) | ((st == FREE_ZERO) & (np.abs(d) > tol))
        return not bad.any()

    def _repair_dual(self) -> None:
        """Flip boxed columns whose reduced cost drifted to the wrong sign."""
        tol = self.cfg.optimality_tol * 10
        st, d = self.status, self.d
        nb = st != BASIC
        to_up = nb & (st == AT_LOWER) & (d < -tol) & np.isfinite(self.ub)
        to_lo = nb & (st == AT_UPPER) & (d > tol) & np.isfinite(self.lb)
        if to_up.any() or to_lo.any():
            st[to_up] = AT_UPPER
            st[to_lo] = AT_LOWER
            self.x[to_up] = self.ub[to_up]
            self.x[to_lo] = self.lb[to_lo]
            self._recompute()

    def _dual_ratio(self, alpha_r: np.ndarray, below: bool) -> int:
        """Entering column by a two-pass (Harris) dual ratio test."""
        g = alpha_r if below else -alpha_r
        st = self.status
        movable = (st != BASIC) & (self.ub > self.lb)
        ptol = self.cfg.pivot_tol
        elig = movable & (
            ((st == AT_LOWER) & (g < -ptol)) | ((st == AT_UPPER) & (g > ptol)) | ((st == FREE_ZERO) & (np.abs(g) > ptol))
        )
        idx = np.flatnonzero(elig)
        if idx.size == 0:
            return -1
        gi = np.abs(g[idx])
        di = np.abs(self.d[idx])
        # wrong-signed tiny reduced costs are treated as zero
        sign_ok = np.where(st[idx] == AT_LOWER, self.d[idx] >= 0, np.where(st[idx] == AT_UPPER, self.d[idx] <= 0, True))
        di = np.where(sign_ok, di, 0.0)
        ratios = di / gi
        if self.bland:
            best = ratios.min()
            return int(idx[ratios <= best + 1e-12].min())
        bound = ((di + self.cfg.optimality_tol) / gi).min()
        pick = np.argmax(np.where(ratios <= bound, gi, -1.0))
        return int(idx[pick])

    def _pivot(self, r: int, q: int, alpha_q: np.ndarray, alpha_r: np.ndarray, target: float, below: bool) -> None:
        leaving = int(self.head[r])
        arq = alpha_q[r]
        theta_d = self.d[q] / arq
        if theta_d != 0.0:
            nb = self.status != BASIC
            self.d[nb] -= theta_d * alpha_r[nb]
        self.d[q] = 0.0
        self.d[leaving] = -theta_d
        theta_p = (self.x[leaving] - target) / arq
        self.x[self.head] -= theta_p * alpha_q
        self.x[q] += theta_p
        self.x[leaving] = target
        self.status[leaving] = AT_LOWER if below else AT_UPPER
        if self.lb[leaving] == self.ub[leaving]:
            self.status[leaving] = AT_LOWER
        self.status[q] = BASIC
        self.head[r] = q
        self.factor.update(r, alpha_q)

    def _update_weights(self, r: int, alpha_q: np.ndarray, tau: np.ndarray) -> None:
        arq = alpha_q[r]
        wr = self.weights[r]
        with np.errstate(over="ignore", invalid="ignore"):
            ratio = alpha_q / arq
            w = self.weights - 2.0 * ratio * tau + ratio * ratio * wr
            w[r] = wr / (arq * arq)
        if not np.all(np.isfinite(w)):
            # blown-up reference framework: restart from unit weights
            w = np.ones_like(w)
        self.weights = np.maximum(w, 1e-4)

    # primal clean-up ---------------------------------------------------

    def _primal_cleanup(self) -> str:
        """Primal simplex from a primal-feasible basis until dual feasible."""
        self._refactor()
        self._recompute()
        since_refactor = 0
        tol = self.cfg.optimality_tol
        stall = 0
        while True:
            if self.iterations >= self.limit:
                return "iteration-limit"
            if np.any(self._primal_infeasibility()):
                # round-off pushed the point out; go back to the dual phase
                status = self._dual_phase()
                if status != "optimal":
                    return status
                self._unperturb()
                continue
            st, d = self.status, self.d
            movable = (st != BASIC) & (self.ub > self.lb)
            gain = np.where(movable & (st == AT_LOWER) & (d < -tol), -d, 0.0)
            gain = np.where(movable & (st == AT_UPPER) & (d > tol), d, gain)
            gain = np.where(movable & (st == FREE_ZERO) & (np.abs(d) > tol), np.abs(d), gain)
            if not gain.any():
                return "optimal"
            if stall >= self.cfg.stall_threshold:
                q = int(np.flatnonzero(gain)[0])
            else:
                q = int(np.argmax(gain / np.concatenate([self.lp._col_scale, np.ones(self.lp.m)])))
            increase = (st[q] == AT_LOWER) or (st[q] == FREE_ZERO and d[q] < 0)
            alpha_q = self.factor.ftran(self.lp._column(q))
            direction = -alpha_q if increase else alpha_q
            xb = self.x[self.head]
            lo = self.lb[self.head]
            hi = self.ub[self.head]
            step = np.inf
            r = -1
            ptol = self.cfg.pivot_tol
            with np.errstate(divide="ignore", invalid="ignore"):
                down = direction < -ptol
                up = direction > ptol
                lim = np.full(len(xb), np.inf)
                lim[down] = np.maximum(xb[down] - lo[down], 0.0) / -direction[down]
                lim[up] = np.maximum(hi[up] - xb[up], 0.0) / direction[up]
            if lim.size and np.isfinite(lim).any():
                # Harris: among rows blocking within a tolerance, take the largest pivot
                ftol = self.cfg.feasibility_tol
                with np.errstate(divide="ignore", invalid="ignore"):
                    relaxed = np.full(len(xb), np.inf)
                    relaxed[down] = (np.maximum(xb[down] - lo[down], 0.0) + ftol) / -direction[down]
                    relaxed[up] = (np.maximum(hi[up] - xb[up], 0.0) + ftol) / direction[up]
                cap = relaxed.min()
                size = np.where(lim <= cap, np.abs(direction), -1.0)
                r = int(np.argmax(size))
                step = lim[r]
            span = self.ub[q] - self.lb[q]
            if span <= step:
                # bound flip of the entering column
                if not np.isfinite(span):
                    return "unbounded"
                delta = span if increase else -span
                self.x[self.head] -= delta * alpha_q
                self.x[q] += delta
                st[q] = AT_UPPER if increase else AT_LOWER
                self.iterations += 1
                continue
            if not np.isfinite(step):
                return "unbounded"
            leaving = int(self.head[r])
            to_lower = direction[r] < 0
            target = self.lb[leaving] if to_lower else self.ub[leaving]
            rho = self.factor.btran(_unit(self.lp.m, r))
            alpha_r = self.lp._row_alpha(rho)
            delta = step if increase else -step
            theta_d = d[q] / alpha_q[r]
            nb = st != BASIC
            self.d[nb] -= theta_d * alpha_r[nb]
            self.d[q] = 0.0
            self.d[leaving] = -theta_d
            self.x[self.head] -= delta * alpha_q
            self.x[q] += delta
            self.x[leaving] = target
            st[leaving] = AT_LOWER if (to_lower or self.lb[leaving] == self.ub[leaving]) else AT_UPPER
            st[q] = BASIC
            self.head[r] = q
            self.factor.update(r, alpha_q)
            self.weights[r] = max(self.weights[r] / alpha_q[r] ** 2, 1e-4)
            self.iterations += 1
            since_refactor += 1
            stall = stall + 1 if step <= 1e-12 else 0
            if since_refactor >= self.cfg.refactor_every:
                self._refactor()
                self._recompute()
                since_refactor = 0


def _scale_factors(A: sp.csc_matrix, passes: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Row and column factors (powers of two) from geometric-mean passes plus equilibration."""
    m, n = A.shape
    row = np.ones(m)
    col = np.ones(n)
    if A.nnz == 0:
        return row, col
    absA = abs(A).tocsr()

    def extremes(M, axis):
        big = np.asarray(M.max(axis=axis).todense()).ravel()
        inv = M.copy()
        inv.data = 1.0 / inv.data
        small = 1.0 / np.maximum(np.asarray(inv.max(axis=axis).todense()).ravel(), 1e-300)
        return big, small

    def factor(big, small):
        # empty rows and columns keep factor 1
        return np.where(big > 0, 1.0 / np.sqrt(np.where(big > 0, big * small, 1.0)), 1.0)

    for _ in range(passes):
        S = (sp.diags(row) @ absA @ sp.diags(col)).tocsr()
        row *= factor(*extremes(S, 1))
        S = (sp.diags(row) @ absA @ sp.diags(col)).tocsc()
        col *= factor(*extremes(S, 0))
    S = (sp.diags(row) @ absA @ sp.diags(col)).tocsr()
    big = np.asarray(S.max(axis=1).todense()).ravel()
    row = np.where(big > 0, row / np.where(big > 0, big, 1.0), row)
    return np.exp2(np.round(np.log2(row))), np.exp2(np.round(np.log2(col)))


def _unit(m: int, r: int) -> np.ndarray:
    e = np.zeros(m)
    e[r] = 1.0
    return e


def solve_lp(model: MilpModel, config: LpConfig | None = None) -> LpSolution:
    """Solve the linear relaxation of ``model`` (integrality flags ignored)."""
    return SimplexLP(model.arrays(), config).solve()
