"""Universal constants and the large numeric multipliers used by the samplers.

The analysis behind the samplers leaves two constants unspecified (a beta-tail
constant ``c`` and a Gaussian-tail / covariance-concentration constant ``C``)
and uses large multipliers (10^4, 1000, ...) that make desk-scale runs
infeasible. A :class:`ConstantsProfile` pins both down.

In ``paper_faithful`` mode the caller must supply ``c`` and ``C`` and every
multiplier takes its analytic value. In ``practical`` mode ``c`` and ``C``
default to conservative placeholders (not values from any analysis) and the
accuracy-side multipliers are shrunk; multipliers that carry a privacy
guarantee keep their analytic value unless explicitly overridden.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Mapping
from types import MappingProxyType

from privsample.errors import InvalidInputError

PAPER_FAITHFUL = "paper_faithful"
PRACTICAL = "practical"

PRACTICAL_c = 0.01
PRACTICAL_C = 2.0

# name -> (analytic value, practical default)
MULTIPLIERS: Mapping[str, tuple[float, float]] = MappingProxyType({
    # B = R + m * C * sqrt(d + log(2 log(2/delta) / (alpha eps)))
    "known_cov.B": (1e4, 3.0),
    # n = 1 + ceil(m * B * sqrt(log(2/delta)) / eps); privacy-critical
    "known_cov.n": (10.0, 10.0),
    # B = R + m * kappa * sqrt(d + log(2 log(2/delta) / (alpha eps)))
    "bounded_cov.B": (1e4, 3.0),
    # n1 = n2 = ceil(m * C^2 * B^2 * log(10/delta) / (c eps))
    "bounded_cov.n": (1e4, 1e-3),
    # B = R + m * kappa * sqrt(d (log(2d/(alpha eps)) + log log(2/delta)))
    "simple_cov.B": (1e4, 3.0),
    # n1 = n2 = ceil(m * B^2 log(2/delta) / (sigma^2 eps^2)); privacy-critical
    "simple_cov.n": (100.0, 100.0),
    # the 1000 in B_l, n_l (preconditioner) and B (product sampler)
    "product.scale": (1000.0, 10.0),
    # densest-ball radius r = m * C * kappa * sqrt(d)
    "densest_ball.r": (10.0, 10.0),
})


@dataclasses.dataclass(frozen=True)
class ConstantsProfile:
    """Constants and scale mode for parameter derivation.

    Attributes:
        c: Beta-tail constant, in (0, 1).
        C: Gaussian-tail constant, >= 1.
        scale_mode: ``"paper_faithful"`` or ``"practical"``.
        overrides: Named multiplier overrides; only consulted in practical mode.
    """

    c: float | None = None
    C: float | None = None
    scale_mode: str = PRACTICAL
    overrides: Mapping[str, float] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.scale_mode not in (PAPER_FAITHFUL, PRACTICAL):
            raise InvalidInputError(f"unknown scale mode {self.scale_mode!r}")
        if self.scale_mode == PAPER_FAITHFUL and (self.c is None or self.C is None):
            raise InvalidInputError(
                "paper-faithful mode needs explicit c and C; the analysis never fixes them"
            )
        if self.scale_mode == PRACTICAL:
            if self.c is None:
                object.__setattr__(self, "c", PRACTICAL_c)
            if self.C is None:
                object.__setattr__(self, "C", PRACTICAL_C)
        if not 0 < self.c < 1:
            raise InvalidInputError(f"c must lie in (0, 1), got {self.c}")
        if not self.C >= 1:
            raise InvalidInputError(f"C must be >= 1, got {self.C}")
        unknown = set(self.overrides) - set(MULTIPLIERS) - {"bounded_cov.ptr_threshold_fraction"}
        if unknown:
            raise InvalidInputError(f"unknown multiplier overrides: {sorted(unknown)}")
        object.__setattr__(self, "overrides", MappingProxyType(dict(self.overrides)))

    @classmethod
    def paper(cls, c: float, C: float) -> ConstantsProfile:
        return cls(c=c, C=C, scale_mode=PAPER_FAITHFUL)

    @classmethod
    def practical(cls, c=None, C=None, **overrides) -> ConstantsProfile:
        """Practical profile; keyword overrides use ``__`` in place of ``.``."""
        return cls(c=c, C=C, scale_mode=PRACTICAL,
                   overrides={k.replace("__", "."): v for k, v in overrides.items()})

    @property
    def is_paper(self) -> bool:
        return self.scale_mode == PAPER_FAITHFUL

    def multiplier(self, name: str) -> float:
        paper_value, practical_value = MULTIPLIERS[name]
        if self.is_paper:
            return paper_value
        return float(self.overrides.get(name, practical_value))

    def as_dict(self) -> dict:
        return {
            "c": self.c,
            "C": self.C,
            "scale_mode": self.scale_mode,
            "overrides": dict(sorted(self.overrides.items())),
        }
