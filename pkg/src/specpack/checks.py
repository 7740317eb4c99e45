"""Named pass/fail records attached to constructions and reports."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    bound: float
    relation: str = "<="

    @property
    def margin(self) -> float:
        """Signed slack; nonnegative iff the check passed."""
        if self.relation == "<=":
            return self.bound - self.value
        if self.relation == ">=":
            return self.value - self.bound
        return 0.0 if self.passed else -1.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": _num(self.value),
            "bound": _num(self.bound),
            "relation": self.relation,
            "margin": _num(self.margin),
        }


def _num(x: float):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def at_most(name: str, value: float, bound: float) -> Check:
    return Check(name, bool(value <= bound), float(value), float(bound), "<=")


def at_least(name: str, value: float, bound: float) -> Check:
    return Check(name, bool(value >= bound), float(value), float(bound), ">=")


def holds(name: str, ok: bool) -> Check:
    return Check(name, bool(ok), float(ok), 1.0, "is")


def all_passed(checks) -> bool:
    return all(c.passed for c in checks)
