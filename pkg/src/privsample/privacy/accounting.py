"""Closed-form privacy accounting: advanced composition and subsampling."""

from __future__ import annotations

import dataclasses
import math

from scipy import optimize

from privsample.budget import PrivacyBudget
from privsample.errors import InvalidInputError


@dataclasses.dataclass(frozen=True)
class CompositionQuery:
    """k-fold repetition of an (eps0, delta0)-DP mechanism with slack delta1."""

    eps0: float
    delta0: float
    k: int
    delta1: float

    def __post_init__(self):
        if not (math.isfinite(self.eps0) and self.eps0 > 0):
            raise InvalidInputError(f"eps0 must be positive, got {self.eps0}")
        if not 0 <= self.delta0 <= 0.5:
            raise InvalidInputError(f"delta0 must lie in [0, 1/2], got {self.delta0}")
        if not 0 < self.delta1 <= 0.5:
            raise InvalidInputError(f"delta1 must lie in (0, 1/2], got {self.delta1}")
        if int(self.k) != self.k or self.k < 1:
            raise InvalidInputError(f"k must be a positive integer, got {self.k}")


def advanced_composition(q: CompositionQuery) -> PrivacyBudget:
    """(eps1, k delta0 + delta1) with eps1 = (sqrt(2k ln(1/delta1)) + k(e^eps0 - 1)) eps0."""
    eps1 = (math.sqrt(2 * q.k * math.log(1 / q.delta1)) + q.k * math.expm1(q.eps0)) * q.eps0
    delta = q.k * q.delta0 + q.delta1
    if delta >= 1:
        raise InvalidInputError(f"composed delta {delta} is not below 1")
    return PrivacyBudget(eps1, delta)


def subsampling_amplification(eps: float, delta: float, n: int, N: int) -> PrivacyBudget:
    """Budget of running an (eps, delta)-DP mechanism on n of N rows drawn without replacement.

    Returns (ln(1 + (n/N)(e^eps - 1)), (n/N) delta).
    """
    if not (1 <= n <= N):
        raise InvalidInputError(f"need 1 <= n <= N, got n={n}, N={N}")
    if n == N:
        return PrivacyBudget(eps, delta)
    ratio = n / N
    return PrivacyBudget(math.log1p(ratio * math.expm1(eps)), ratio * delta)


def per_step_eps(total_eps: float, k: int, delta1: float) -> float:
    """Largest per-step eps whose k-fold composition stays within `total_eps`.

    Takes the better of basic composition (total / k) and advanced composition
    with slack `delta1`, the latter solved numerically.
    """
    if not total_eps > 0 or k < 1:
        raise InvalidInputError("need total_eps > 0 and k >= 1")
    basic = total_eps / k

    def excess(e):
        return (math.sqrt(2 * k * math.log(1 / delta1)) + k * math.expm1(e)) * e - total_eps

    # excess is increasing in e and negative at 0
    hi = basic
    while excess(hi) < 0:
        hi *= 2
    advanced = optimize.brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-14)
    # brentq may land a hair above the root
    while excess(advanced) > 0:
        advanced = math.nextafter(advanced, 0.0)
    return max(basic, advanced)
