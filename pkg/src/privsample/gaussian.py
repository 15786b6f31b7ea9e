"""Differentially private samplers for multivariate Gaussians.

Three samplers live here:

* :func:`spherical_gaussian_sampler` -- known (identity) covariance; a
  truncated mean plus Gaussian noise calibrated so that, absent truncation, the
  output is distributed exactly as N(mu, I).
* :func:`bounded_cov_sampler` -- unknown covariance with I <= Sigma <= kappa I.
  A propose-test-release check on the smallest eigenvalue of the empirical
  Gram matrix of pair differences, then a uniformly random unit-norm linear
  combination of those differences (2-stability keeps the output Gaussian).
* :func:`simple_bounded_cov_sampler` -- the simpler, worse Gaussian-mechanism
  variant for the same setting.

Parameter derivations mirror the analytic settings; see
:mod:`privsample.profile` for how practical mode rescales them.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from privsample.budget import PrivacyBudget
from privsample.errors import InvalidInputError
from privsample.noise import StlapParams, stlap_sample, unit_sphere_sample
from privsample.numerics import inv_sqrt_psd, min_eigenvalue, sqrt_psd, trunc_rows
from privsample.profile import ConstantsProfile

PTR_THRESHOLD_FRACTION = 0.75


def _check_ranges(budget: PrivacyBudget, alpha: float):
    if budget.eps > 1:
        raise InvalidInputError(f"derivations assume eps <= 1, got {budget.eps}")
    if not 0 < budget.delta <= 0.5:
        raise InvalidInputError(f"derivations assume delta in (0, 1/2], got {budget.delta}")
    if not 0 < alpha <= 0.5:
        raise InvalidInputError(f"alpha must lie in (0, 1/2], got {alpha}")


def _as_samples(data, rows: int, d: int | None = None) -> np.ndarray:
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError(f"expected an (n, d) sample matrix, got shape {X.shape}")
    if X.shape[0] != rows:
        raise InvalidInputError(f"sampler needs exactly {rows} rows, got {X.shape[0]}")
    if d is not None and X.shape[1] != d:
        raise InvalidInputError(f"sampler needs dimension {d}, got {X.shape[1]}")
    return X


@dataclasses.dataclass(frozen=True)
class SamplerOutcome:
    """Output of a PTR-gated sampler; ``value is None`` encodes bottom."""

    value: np.ndarray | None
    diagnostics: dict = dataclasses.field(default_factory=dict)

    @property
    def is_bottom(self) -> bool:
        return self.value is None


# --- known covariance -------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class KnownCovParams:
    B: float
    sigma: float
    n: int
    R: float = 0.0

    def __post_init__(self):
        if not self.B > 0:
            raise InvalidInputError(f"B must be positive, got {self.B}")
        if not self.sigma >= 0:
            raise InvalidInputError(f"sigma must be nonnegative, got {self.sigma}")
        if self.n < 1:
            raise InvalidInputError(f"n must be >= 1, got {self.n}")
        if self.R < 0:
            raise InvalidInputError(f"R must be nonnegative, got {self.R}")

    @staticmethod
    def exact_sigma(n: int) -> float:
        """Noise scale making sigma^2 + 1/n = 1."""
        return math.sqrt((n - 1) / n)

    def as_dict(self) -> dict:
        return {"B": self.B, "sigma": self.sigma, "n": self.n, "R": self.R}


def derive_known_cov_params(
    d: int, R: float, budget: PrivacyBudget, alpha: float, profile: ConstantsProfile
) -> KnownCovParams:
    """B, n and sigma for the known-covariance sampler.

    B = R + m_B C sqrt(d + ln(2 ln(2/delta) / (alpha eps))),
    n = 1 + ceil(m_n B sqrt(ln(2/delta)) / eps), sigma = sqrt((n-1)/n),
    with m_B = 10^4 and m_n = 10 in paper-faithful mode.
    """
    _check_ranges(budget, alpha)
    if d < 1 or R < 0:
        raise InvalidInputError("need d >= 1 and R >= 0")
    eps, delta = budget.eps, budget.delta
    log2d = math.log(2 / delta)
    B = R + profile.multiplier("known_cov.B") * profile.C * math.sqrt(
        d + math.log(2 * log2d / (alpha * eps))
    )
    n = 1 + math.ceil(profile.multiplier("known_cov.n") * B * math.sqrt(log2d) / eps)
    return KnownCovParams(B=B, sigma=KnownCovParams.exact_sigma(n), n=n, R=R)


def spherical_gaussian_sampler(data, params: KnownCovParams, rng: np.random.Generator) -> np.ndarray:
    """Mean of l2-truncated rows plus N(0, sigma^2 I) noise.

    `data` must already be whitened (see :func:`whiten`) when the known
    covariance is not the identity.
    """
    X = _as_samples(data, params.n)
    mean = trunc_rows(X, params.B, p=2).mean(axis=0)
    return mean + params.sigma * rng.standard_normal(X.shape[1])


def whiten(data, sigma) -> np.ndarray:
    """Map rows X to sigma^{-1/2} X."""
    return np.asarray(data, dtype=float) @ inv_sqrt_psd(sigma)


def unwhiten(y, sigma) -> np.ndarray:
    """Map a whitened-space output back: sigma^{1/2} y."""
    return sqrt_psd(sigma) @ np.asarray(y, dtype=float)


def known_cov_sampler(data, sigma, params: KnownCovParams, rng: np.random.Generator) -> np.ndarray:
    """Known-covariance sampler for arbitrary positive definite `sigma`."""
    return unwhiten(spherical_gaussian_sampler(whiten(data, sigma), params, rng), sigma)


# --- bounded covariance, PTR sampler ----------------------------------------


@dataclasses.dataclass(frozen=True)
class BoundedCovParams:
    """Parameters of the PTR-gated bounded-covariance sampler.

    Attributes:
        d: Dimension.
        B: l2 truncation radius.
        n1: Rows used for the empirical mean.
        n2: Number of difference pairs (2 * n2 rows).
        kappa: Covariance upper bound, Sigma <= kappa I.
        R: Mean-norm bound.
        threshold: The check passes iff lambda_min + r (+ s) >= threshold.
        shift_compensation: Add the STLap shift s back before comparing.
            Only practical profiles set this; with it, passing no longer
            implies lambda_min >= threshold.
    """

    d: int
    B: float
    n1: int
    n2: int
    kappa: float = 1.0
    R: float = 0.0
    threshold: float | None = None
    shift_compensation: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInputError(f"d must be >= 1, got {self.d}")
        if not self.B > 0:
            raise InvalidInputError(f"B must be positive, got {self.B}")
        if self.n1 != self.n2:
            raise InvalidInputError(f"n1 and n2 must be equal, got {self.n1} and {self.n2}")
        if self.n2 < 2 * self.d:
            raise InvalidInputError(f"n2 must be >= 2d = {2 * self.d}, got {self.n2}")
        if self.kappa < 1:
            raise InvalidInputError(f"kappa must be >= 1, got {self.kappa}")
        if self.threshold is None:
            object.__setattr__(self, "threshold", PTR_THRESHOLD_FRACTION * self.n2)

    @property
    def Delta(self) -> float:
        """Sensitivity of lambda_min of the Gram matrix of pair differences."""
        return 2.0 * self.B ** 2

    @property
    def rows(self) -> int:
        return self.n1 + 2 * self.n2

    def stlap(self, budget: PrivacyBudget) -> StlapParams:
        return StlapParams(budget.eps / 2, budget.delta / 2, self.Delta)

    def as_dict(self) -> dict:
        return {
            "d": self.d, "B": self.B, "Delta": self.Delta, "n1": self.n1, "n2": self.n2,
            "kappa": self.kappa, "R": self.R, "threshold": self.threshold,
            "shift_compensation": self.shift_compensation,
        }


def recalibrated_threshold(d: int, n2: int, budget: PrivacyBudget, alpha: float, C: float) -> float:
    """PTR threshold that benign data (Sigma >= I) clears with prob >= 1 - alpha/2.

    Uses the empirical-covariance concentration bound
    lambda_min >= n2 (1 - C sqrt((d + ln(4/alpha)) / n2)) (failure alpha/4),
    minus a margin covering the centred STLap noise (failure alpha/4).
    """
    lam = n2 * (1.0 - C * math.sqrt((d + math.log(4 / alpha)) / n2))
    margin = (2.0 / budget.eps) * math.log(4 / alpha)
    return max(lam - margin, 0.0)


def derive_bounded_cov_params(
    d: int,
    R: float,
    kappa: float,
    budget: PrivacyBudget,
    alpha: float,
    profile: ConstantsProfile,
    n2: int | None = None,
) -> BoundedCovParams:
    """Parameters for :func:`bounded_cov_sampler`.

    B = R + m_B kappa sqrt(d + ln(2 ln(2/delta) / (alpha eps))), Delta = 2 B^2,
    n1 = n2 = ceil(m_n C^2 B^2 ln(10/delta) / (c eps)), raised to 2d if needed.

    In practical mode `n2` may be given explicitly, and the PTR threshold is
    recalibrated (see :func:`recalibrated_threshold`) with shift compensation,
    unless ``bounded_cov.ptr_threshold_fraction`` is overridden.
    """
    _check_ranges(budget, alpha)
    if kappa < 1:
        raise InvalidInputError(f"kappa must be >= 1, got {kappa}")
    if d < 1 or R < 0:
        raise InvalidInputError("need d >= 1 and R >= 0")
    eps, delta = budget.eps, budget.delta
    B = R + profile.multiplier("bounded_cov.B") * kappa * math.sqrt(
        d + math.log(2 * math.log(2 / delta) / (alpha * eps))
    )
    if n2 is None:
        n2 = math.ceil(
            profile.multiplier("bounded_cov.n") * profile.C ** 2 * B ** 2
            * math.log(10 / delta) / (profile.c * eps)
        )
    elif profile.is_paper:
        raise InvalidInputError("explicit n2 is only allowed in practical mode")
    n2 = max(int(n2), 2 * d)
    if profile.is_paper:
        return BoundedCovParams(d=d, B=B, n1=n2, n2=n2, kappa=kappa, R=R)
    fraction = profile.overrides.get("bounded_cov.ptr_threshold_fraction")
    if fraction is not None:
        return BoundedCovParams(d=d, B=B, n1=n2, n2=n2, kappa=kappa, R=R,
                                threshold=float(fraction) * n2)
    return BoundedCovParams(
        d=d, B=B, n1=n2, n2=n2, kappa=kappa, R=R,
        threshold=recalibrated_threshold(d, n2, budget, alpha, profile.C),
        shift_compensation=True,
    )


def pair_differences(X_trunc: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """U_i = (X_{n1+2i-1} - X_{n1+2i}) / sqrt(2), i = 1..n2 (1-based rows)."""
    tail = X_trunc[n1:n1 + 2 * n2]
    return (tail[0::2] - tail[1::2]) / math.sqrt(2.0)


def bounded_cov_sampler(
    data, params: BoundedCovParams, budget: PrivacyBudget, rng: np.random.Generator
) -> SamplerOutcome:
    """PTR-gated sampler for Gaussians with I <= Sigma <= kappa I.

    Aborts (returns bottom) when lambda_min(sum_i U_i U_i^T) + r falls below
    the threshold, with r ~ STLap(eps/2, delta/2, 2 B^2). The published
    pseudocode states the inequality the other way round; aborting on the
    *low* side is what the accompanying privacy argument needs, since passing
    must certify lambda_min >= 0.75 n2.
    """
    X = _as_samples(data, params.rows, params.d)
    Xt = trunc_rows(X, params.B, p=2)
    U = pair_differences(Xt, params.n1, params.n2)
    lam = min_eigenvalue(U.T @ U)
    stlap = params.stlap(budget)
    r = stlap_sample(stlap, rng)
    stat = lam + r + (stlap.shift if params.shift_compensation else 0)
    diagnostics = {"lambda_min": lam, "r": r, "shift": stlap.shift, "threshold": params.threshold}
    if stat < params.threshold:
        return SamplerOutcome(None, diagnostics)
    a = unit_sphere_sample(params.n2, rng)
    value = Xt[:params.n1].mean(axis=0) + math.sqrt(1.0 - 1.0 / params.n1) * (a @ U)
    return SamplerOutcome(value, diagnostics)


# --- bounded covariance, simple Gaussian-mechanism sampler -------------------


@dataclasses.dataclass(frozen=True)
class SimpleBoundedCovParams:
    B: float
    sigma: float
    n1: int
    n2: int
    R: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if not self.B > 0 or self.sigma < 0 or self.n1 < 1 or self.n2 < 1:
            raise InvalidInputError("need B > 0, sigma >= 0, n1 >= 1, n2 >= 1")

    @property
    def rows(self) -> int:
        return self.n1 + 2 * self.n2

    def as_dict(self) -> dict:
        return {"B": self.B, "sigma": self.sigma, "n1": self.n1, "n2": self.n2,
                "R": self.R, "kappa": self.kappa}


def derive_simple_bounded_cov_params(
    d: int, R: float, kappa: float, budget: PrivacyBudget, alpha: float, profile: ConstantsProfile
) -> SimpleBoundedCovParams:
    """B = R + m_B kappa sqrt(d (ln(2d/(alpha eps)) + ln ln(2/delta))),
    sigma = sqrt(alpha) / (2 d^{1/4}), n1 = n2 = ceil(100 B^2 ln(2/delta) / (sigma eps)^2).
    """
    _check_ranges(budget, alpha)
    if kappa < 1:
        raise InvalidInputError(f"kappa must be >= 1, got {kappa}")
    eps, delta = budget.eps, budget.delta
    B = R + profile.multiplier("simple_cov.B") * kappa * math.sqrt(
        d * (math.log(2 * d / (alpha * eps)) + math.log(math.log(2 / delta)))
    )
    sigma = math.sqrt(alpha) / (2 * d ** 0.25)
    n = math.ceil(profile.multiplier("simple_cov.n") * B ** 2 * math.log(2 / delta) / (sigma * eps) ** 2)
    return SimpleBoundedCovParams(B=B, sigma=sigma, n1=n, n2=n, R=R, kappa=kappa)


def simple_bounded_cov_sampler(data, B, sigma, n1, n2, rng: np.random.Generator) -> np.ndarray:
    """Truncated mean + scaled pair differences + N(0, sigma^2 I).

    Absent truncation the output is distributed as N(mu, Sigma + sigma^2 I).
    """
    X = _as_samples(data, n1 + 2 * n2)
    Xt = trunc_rows(X, B, p=2)
    tail = Xt[n1:]
    diffs = (tail[0::2] - tail[1::2]).sum(axis=0)
    coef = math.sqrt((1.0 - 1.0 / n1) / (2.0 * n2))
    return Xt[:n1].mean(axis=0) + coef * diffs + sigma * rng.standard_normal(X.shape[1])


# --- analytic privacy guard ---------------------------------------------------


def noise_multiplier_check(params, budget: PrivacyBudget, profile: ConstantsProfile | None = None) -> bool:
    """True iff `params` satisfy the analytic privacy condition for `budget`.

    * Known covariance: n sigma / B >= 10 sqrt(ln(2/delta)) / eps.
    * Simple bounded covariance: sigma / (B max(1/n1, sqrt((1 - 1/n1)/(2 n2))))
      >= 10 sqrt(ln(2/delta)) / eps.
    * PTR bounded covariance (needs `profile` for c and C): unshifted 0.75 n2
      threshold, n1 = n2 >= max(2d, 10^4 C^2 B^2 ln(10/delta) / (c eps)).
    """
    eps, delta = budget.eps, budget.delta
    if delta <= 0:
        return False
    target = 10.0 * math.sqrt(math.log(2 / delta)) / eps
    if isinstance(params, KnownCovParams):
        return params.n * params.sigma / params.B >= target
    if isinstance(params, SimpleBoundedCovParams):
        scale = params.B * max(1.0 / params.n1, math.sqrt((1 - 1 / params.n1) / (2 * params.n2)))
        return params.sigma / scale >= target
    if isinstance(params, BoundedCovParams):
        if profile is None:
            raise InvalidInputError("the PTR sampler check needs a ConstantsProfile for c and C")
        need = 1e4 * profile.C ** 2 * params.B ** 2 * math.log(10 / delta) / (profile.c * eps)
        return (
            not params.shift_compensation
            and params.threshold >= PTR_THRESHOLD_FRACTION * params.n2
            and params.n1 == params.n2
            and params.n2 >= max(2 * params.d, need)
        )
    raise InvalidInputError(f"no analytic check for {type(params).__name__}")
