"""Solver-agnostic mixed-integer linear program container.

Variables carry bounds, an integrality flag and an objective coefficient;
constraints are sparse rows with a sense and a right-hand side. The sense of
optimization is always minimization.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from nnembed.errors import ModelError

SENSES = ("<=", "=", ">=")


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float
    ub: float
    integral: bool
    obj: float


@dataclass(frozen=True)
class Constraint:
    name: str
    cols: tuple[int, ...]
    coefs: tuple[float, ...]
    sense: str
    rhs: float


@dataclass
class ModelArrays:
    c: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray  # -1 for <=, 0 for =, +1 for >=
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integral: np.ndarray
    obj_offset: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


class MilpModel:
    def __init__(self, name: str = "model") -> None:
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.obj_offset = 0.0
        self._var_index: dict[str, int] = {}
        self._con_names: set[str] = set()
        self._arrays: ModelArrays | None = None

    # construction -------------------------------------------------------
    def add_var(
        self, name: str, lb: float = 0.0, ub: float = math.inf, integral: bool = False, obj: float = 0.0
    ) -> int:
        if name in self._var_index:
            raise ModelError(f"duplicate variable name {name!r}")
        if not (math.isfinite(obj) and not math.isnan(lb) and not math.isnan(ub)):
            raise ModelError(f"variable {name!r}: non-finite data")
        self._var_index[name] = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), bool(integral), float(obj)))
        self._arrays = None
        return len(self.variables) - 1

    def add_binary(self, name: str, obj: float = 0.0) -> int:
        return self.add_var(name, 0.0, 1.0, True, obj)

    def add_constraint(
        self, name: str, terms: Mapping[int, float] | Iterable[tuple[int, float]], sense: str, rhs: float
    ) -> int:
        if sense not in SENSES:
            raise ModelError(f"constraint {name!r}: unknown sense {sense!r}")
        if name in self._con_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[int, float] = {}
        for col, coef in items:
            if not 0 <= col < len(self.variables):
                raise ModelError(f"constraint {name!r}: unknown column {col}")
            merged[col] = merged.get(col, 0.0) + float(coef)
        if not all(math.isfinite(v) for v in merged.values()) or not math.isfinite(rhs):
            raise ModelError(f"constraint {name!r}: non-finite coefficient")
        cols = tuple(sorted(c for c, v in merged.items() if v != 0.0))
        self._con_names.add(name)
        self.constraints.append(Constraint(name, cols, tuple(merged[c] for c in cols), sense, float(rhs)))
        self._arrays = None
        return len(self.constraints) - 1

    def set_objective(self, col: int, coef: float) -> None:
        v = self.variables[col]
        self.variables[col] = Variable(v.name, v.lb, v.ub, v.integral, float(coef))
        self._arrays = None

    # queries ------------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def integer_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.integral]

    def index(self, name: str) -> int:
        return self._var_index[name]

    def arrays(self) -> ModelArrays:
        if self._arrays is None:
            rows, cols, vals = [], [], []
            for i, con in enumerate(self.constraints):
                rows.extend([i] * len(con.cols))
                cols.extend(con.cols)
                vals.extend(con.coefs)
            A = sp.csr_matrix(
                (np.asarray(vals, dtype=float), (np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))),
                shape=(self.num_constraints, self.num_vars),
            )
            code = {"<=": -1, "=": 0, ">=": 1}
            self._arrays = ModelArrays(
                c=np.array([v.obj for v in self.variables], dtype=float),
                A=A,
                sense=np.array([code[c.sense] for c in self.constraints], dtype=int),
                rhs=np.array([c.rhs for c in self.constraints], dtype=float),
                lb=np.array([v.lb for v in self.variables], dtype=float),
                ub=np.array([v.ub for v in self.variables], dtype=float),
                integral=np.array([v.integral for v in self.variables], dtype=bool),
                obj_offset=self.obj_offset,
            )
        return self._arrays

    def objective_value(self, values) -> float:
        x = np.asarray(values, dtype=float)
        return float(self.arrays().c @ x) + self.obj_offset

    def relaxed(self) -> "MilpModel":
        """Copy with every integrality flag dropped."""
        m = MilpModel(self.name + "-relaxed")
        for v in self.variables:
            m.add_var(v.name, v.lb, v.ub, False, v.obj)
        for c in self.constraints:
            m.add_constraint(c.name, zip(c.cols, c.coefs), c.sense, c.rhs)
        m.obj_offset = self.obj_offset
        return m

    def copy(self) -> "MilpModel":
        m = MilpModel(self.name)
        m.variables = list(self.variables)
        m.constraints = list(self.constraints)
        m.obj_offset = self.obj_offset
        m._var_index = dict(self._var_index)
        m._con_names = set(self._con_names)
        return m

    # LP text format -----------------------------------------------------
    def to_lp(self) -> str:
        names = _lp_names([v.name for v in self.variables], "x")
        cnames = _lp_names([c.name for c in self.constraints], "c")
        out = [f"\\ {self.name}", "Minimize"]
        out.append(" obj: " + (_lp_expr(((i, v.obj) for i, v in enumerate(self.variables) if v.obj != 0), names) or "0"))
        if self.obj_offset:
            out[-1] += f" + {_num(self.obj_offset)} __offset"
        out.append("Subject To")
        for c, cname in zip(self.constraints, cnames):
            expr = _lp_expr(zip(c.cols, c.coefs), names) or (f"0 {names[0]}" if names else "0")
            out.append(f" {cname}: {expr} {c.sense} {_num(c.rhs)}")
        if self.obj_offset:
            out.append(" __fix_offset: __offset = 1")
        out.append("Bounds")
        for v, name in zip(self.variables, names):
            lo = "-inf" if v.lb == -math.inf else _num(v.lb)
            hi = "+inf" if v.ub == math.inf else _num(v.ub)
            out.append(f" {lo} <= {name} <= {hi}")
        ints = [name for v, name in zip(self.variables, names) if v.integral]
        if ints:
            out.append("General")
            for i in range(0, len(ints), 8):
                out.append(" " + " ".join(ints[i : i + 8]))
        out.append("End")
        return "\n".join(out) + "\n"

    @classmethod
    def from_lp(cls, text: str) -> "MilpModel":
        return _parse_lp(text)


def _num(x: float) -> str:
    return repr(float(x)) if x != int(x) or abs(x) >= 1e15 else str(int(x))


_LP_OK = re.compile(r"[^A-Za-z0-9_!\"#$%&()/,.;?@`'{}|~]")


def _lp_names(names: list[str], prefix: str) -> list[str]:
    out, seen = [], set()
    for i, name in enumerate(names):
        clean = _LP_OK.sub("_", name)
        if not clean or clean[0].isdigit() or clean[0] in ".eE" or clean.lower() in ("inf", "infinity"):
            clean = f"{prefix}_{clean}"
        if clean in seen:
            clean = f"{clean}__{i}"
        seen.add(clean)
        out.append(clean)
    return out


def _lp_expr(terms, names: list[str]) -> str:
    parts = []
    for col, coef in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        token = names[col] if mag == 1 else f"{_num(mag)} {names[col]}"
        parts.append(f"{sign} {token}")
    if not parts:
        return ""
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[1:] if text.startswith("- ") else text


_TOKEN = re.compile(r"\s*([+-]?)\s*([0-9.eE+-]*\d[0-9.eE+-]*|)\s*([A-Za-z_!\"#$%&()/,.;?@`'{}|~][A-Za-z0-9_!\"#$%&()/,.;?@`'{}|~]*)")


def _parse_terms(expr: str) -> list[tuple[str, float]]:
    expr = expr.strip()
    terms = []
    pos = 0
    while pos < len(expr):
        m = _TOKEN.match(expr, pos)
        if not m:
            raise ModelError(f"cannot parse LP expression near {expr[pos:pos + 30]!r}")
        sign, coef, name = m.groups()
        value = float(coef) if coef else 1.0
        terms.append((name, -value if sign == "-" else value))
        pos = m.end()
    return terms


def _parse_lp(text: str) -> MilpModel:
    """Reader for the subset of the LP format that :meth:`MilpModel.to_lp` writes."""
    section = None
    obj_terms: list[tuple[str, float]] = []
    rows: list[tuple[str, list[tuple[str, float]], str, float]] = []
    bounds: dict[str, tuple[float, float]] = {}
    ints: set[str] = set()
    order: list[str] = []
    name = "model"
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            name = line[1:].strip() or name
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "general", "end"):
            section = low
            continue
        if section == "minimize":
            expr = line.split(":", 1)[1]
            obj_terms = [] if expr.strip() == "0" else _parse_terms(expr)
        elif section == "subject to":
            cname, rest = line.split(":", 1)
            m = re.match(r"(.*?)(<=|>=|=)\s*(\S+)\s*$", rest)
            if not m:
                raise ModelError(f"bad constraint line {line!r}")
            rows.append((cname.strip(), _parse_terms(m.group(1)), m.group(2), float(m.group(3))))
        elif section == "bounds":
            m = re.match(r"(\S+)\s*<=\s*(\S+)\s*<=\s*(\S+)$", line)
            if not m:
                raise ModelError(f"bad bound line {line!r}")
            lo, var, hi = m.groups()
            bounds[var] = (float(lo), float(hi))
            order.append(var)
        elif section == "general":
            ints.update(line.split())
    model = MilpModel(name)
    obj = dict()
    for var, coef in obj_terms:
        obj[var] = obj.get(var, 0.0) + coef
    offset_var = "__offset"
    for var in order:
        if var == offset_var:
            continue
        lo, hi = bounds[var]
        model.add_var(var, lo, hi, var in ints, obj.get(var, 0.0))
    model.obj_offset = obj.get(offset_var, 0.0)
    for cname, terms, sense, rhs in rows:
        if cname == "__fix_offset":
            continue
        model.add_constraint(cname, [(model.index(v), c) for v, c in terms if v in model._var_index], sense, rhs)
    return model
