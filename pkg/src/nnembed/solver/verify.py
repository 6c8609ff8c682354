"""Independent feasibility check for candidate MILP points.

Deliberately plain Python over the model's row objects: it shares no code with
the simplex core, so it can audit that core's answers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from nnembed.milp import MilpModel


@dataclass
class VerifyReport:
    violations: list[str] = field(default_factory=list)
    objective: float = math.nan
    max_violation: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


def verify(model: MilpModel, values, tolerance: float = 1e-9, integrality_tol: float | None = None) -> VerifyReport:
    """Check bounds, rows and integrality; recompute the objective.

    Row violations are measured relative to ``max(1, |rhs|, largest |term|)``
    so that rows with large coefficients are judged at a comparable scale.
    """
    int_tol = tolerance if integrality_tol is None else integrality_tol
    vals = [float(v) for v in values]
    report = VerifyReport()
    if len(vals) != model.num_vars:
        report.violations.append(f"expected {model.num_vars} values, got {len(vals)}")
        return report
    worst = 0.0
    for var, x in zip(model.variables, vals):
        if math.isnan(x):
            report.violations.append(f"{var.name}: value is NaN")
            continue
        scale = max(1.0, abs(x))
        if x < var.lb - tolerance * scale:
            report.violations.append(f"{var.name}: {x:.12g} below lower bound {var.lb:g}")
            worst = max(worst, var.lb - x)
        if x > var.ub + tolerance * scale:
            report.violations.append(f"{var.name}: {x:.12g} above upper bound {var.ub:g}")
            worst = max(worst, x - var.ub)
        if var.integral and abs(x - round(x)) > int_tol:
            report.violations.append(f"{var.name}: integrality violated, value {x:.12g}")
            worst = max(worst, abs(x - round(x)))
    for con in model.constraints:
        activity = 0.0
        biggest = abs(con.rhs)
        for col, coef in zip(con.cols, con.coefs):
            term = coef * vals[col]
            activity += term
            biggest = max(biggest, abs(term))
        slack = tolerance * max(1.0, biggest)
        gap = 0.0
        if con.sense == "<=":
            gap = activity - con.rhs
        elif con.sense == ">=":
            gap = con.rhs - activity
        else:
            gap = abs(activity - con.rhs)
        if gap > slack:
            report.violations.append(f"{con.name}: activity {activity:.12g} {con.sense} {con.rhs:.12g} violated by {gap:.3g}")
        worst = max(worst, gap)
    report.max_violation = max(worst, 0.0)
    report.objective = math.fsum(v.obj * x for v, x in zip(model.variables, vals)) + model.obj_offset
    return report
