"""Report containers for numerical certification runs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class FitResult:
    """Outcome of a log-log growth-exponent fit along a dyadic frequency ladder."""

    exponent: float
    vacuous: bool = False
    n_points: int = 0
    ladder: list = field(default_factory=list)
    envelope: list = field(default_factory=list)

    def __float__(self):
        return float(self.exponent)


@dataclass
class EstimateReport:
    """Fitted exponents / sup constants for one symbol-class claim.

    ``margins[i] <= tolerance`` for every tested order is the pass rule;
    for sup-style claims the margin is ``sup - cap`` and tolerance is 0.
    """

    claim_id: str
    orders_tested: list
    fitted_exponents: list
    bound_exponents: list
    margins: list
    sup_constants: list
    passed: bool
    tolerance: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, np.ndarray):
                return [clean(w) for w in v.tolist()]
            if isinstance(v, (list, tuple)):
                return [clean(w) for w in v]
            if isinstance(v, dict):
                return {str(k): clean(w) for k, w in v.items()}
            if isinstance(v, float) and not np.isfinite(v):
                return repr(v)
            return v

        return {
            "claim_id": self.claim_id,
            "orders_tested": clean(self.orders_tested),
            "fitted_exponents": clean(self.fitted_exponents),
            "bound_exponents": clean(self.bound_exponents),
            "margins": clean(self.margins),
            "sup_constants": clean(self.sup_constants),
            "pass": bool(self.passed),
            "tolerance": float(self.tolerance),
            "extras": clean(self.extras),
        }


def assemble_report(claim_id, orders, fitted, bounds, sups, tolerance, extras=None):
    """Build an EstimateReport with margins = fitted - bound (NaN-safe).

    Entries whose fit was vacuous (empty/NaN) contribute margin -inf,
    i.e. they pass trivially.
    """
    margins = []
    for f, b in zip(fitted, bounds):
        if f is None or (isinstance(f, float) and not np.isfinite(f)):
            margins.append(float("-inf"))
        else:
            margins.append(float(f) - float(b))
    passed = all(m <= tolerance for m in margins)
    return EstimateReport(
        claim_id=claim_id,
        orders_tested=list(orders),
        fitted_exponents=[None if f is None else float(f) for f in fitted],
        bound_exponents=[float(b) for b in bounds],
        margins=margins,
        sup_constants=[float(s) for s in sups],
        passed=passed,
        tolerance=tolerance,
        extras=extras or {},
    )
