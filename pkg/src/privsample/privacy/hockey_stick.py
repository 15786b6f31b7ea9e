"""Monte Carlo estimates of the hockey-stick divergence."""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np
from scipy import stats as sps

from privsample.errors import InvalidInputError
from privsample.stats import clopper_pearson, empirical_bernstein_interval


@dataclasses.dataclass(frozen=True)
class HockeyStickEstimate:
    """d_eps(P || Q) estimates from one batch of draws from P.

    Attributes:
        estimate: Mean of the exact integrand max(1 - e^{eps} Q/P, 0).
        interval: Empirical-Bernstein interval for `estimate`.
        std_error: Sample standard deviation of the integrand over sqrt(trials).
        prob_bound: Pr_P[P > e^eps Q], an upper bound on d_eps(P || Q).
        prob_interval: Clopper-Pearson interval for `prob_bound`.
        confidence: Coverage of both intervals.
        trials: Number of draws.
    """

    estimate: float
    interval: tuple[float, float]
    std_error: float
    prob_bound: float
    prob_interval: tuple[float, float]
    confidence: float
    trials: int


def hockey_stick_estimate(
    logpdf_p: Callable,
    logpdf_q: Callable,
    eps: float,
    sampler_p: Callable,
    trials: int,
    rng: np.random.Generator,
    confidence: float = 0.95,
) -> HockeyStickEstimate:
    """Estimate d_eps(P || Q) = E_P[max(1 - e^{eps + log q - log p}, 0)].

    `sampler_p(rng, size)` must return `size` draws from P (first axis indexes
    draws) and the log densities must accept that batch and return one value
    per draw.
    """
    if trials < 2:
        raise InvalidInputError("need at least two trials")
    if eps < 0:
        raise InvalidInputError(f"eps must be nonnegative, got {eps}")
    y = sampler_p(rng, trials)
    lp = np.asarray(logpdf_p(y), dtype=float)
    lq = np.asarray(logpdf_q(y), dtype=float)
    if lp.shape != (trials,) or lq.shape != (trials,):
        raise InvalidInputError("log densities must return one value per draw")
    if not (np.all(np.isfinite(lp)) and np.all(np.isfinite(lq))):
        raise InvalidInputError("log density is not finite at a sampled point")
    log_ratio = eps + lq - lp
    integrand = np.clip(-np.expm1(log_ratio), 0.0, 1.0)
    mean, interval = empirical_bernstein_interval(integrand, confidence)
    hits = int(np.count_nonzero(log_ratio < 0))
    return HockeyStickEstimate(
        estimate=mean,
        interval=interval,
        std_error=float(integrand.std(ddof=1) / math.sqrt(trials)),
        prob_bound=hits / trials,
        prob_interval=clopper_pearson(hits, trials, confidence),
        confidence=confidence,
        trials=trials,
    )


def gaussian_hockey_stick(mu: float, eps: float) -> float:
    """Exact d_eps(N(0,1) || N(mu,1)) = Phi(-eps/mu + mu/2) - e^eps Phi(-eps/mu - mu/2)."""
    mu = abs(mu)
    if mu == 0:
        return max(0.0, -math.expm1(eps)) if eps < 0 else 0.0
    return float(sps.norm.cdf(-eps / mu + mu / 2) - math.exp(eps) * sps.norm.cdf(-eps / mu - mu / 2))
