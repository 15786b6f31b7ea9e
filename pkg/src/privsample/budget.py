"""Privacy budgets."""

from __future__ import annotations

import dataclasses
import math

from privsample.errors import InvalidInputError


@dataclasses.dataclass(frozen=True)
class PrivacyBudget:
    """An (eps, delta) pair. delta == 0 means pure DP."""

    eps: float
    delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise InvalidInputError(f"eps must be positive and finite, got {self.eps}")
        if not (0 <= self.delta < 1):
            raise InvalidInputError(f"delta must lie in [0, 1), got {self.delta}")

    def split(self, parts: int) -> PrivacyBudget:
        """Per-stage budget under basic composition into `parts` equal stages."""
        return PrivacyBudget(self.eps / parts, self.delta / parts)

    def __add__(self, other: PrivacyBudget) -> PrivacyBudget:
        return PrivacyBudget(self.eps + other.eps, self.delta + other.delta)

    def as_dict(self) -> dict:
        return {"eps": self.eps, "delta": self.delta}


def basic_composition(*budgets: PrivacyBudget) -> PrivacyBudget:
    """Sum of stage budgets."""
    if not budgets:
        raise InvalidInputError("need at least one budget")
    total = budgets[0]
    for b in budgets[1:]:
        total = total + b
    return total
