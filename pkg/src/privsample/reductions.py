"""Wrapper reductions around the bounded-parameter Gaussian samplers.

* :func:`densest_ball_rough_mean` plus :func:`bounded_mean_reduction` remove
  the mean-norm bound R: a private coordinate-wise histogram locates a rough
  centre, the remaining rows are shifted by it and handed to a bounded-mean
  sampler.
* :func:`unbounded_cov_sampler` removes the covariance bound: a (pluggable)
  Gaussian learner gives a constant-accuracy preconditioner, the remaining rows
  are whitened so that their covariance lies between I and 4I, and the
  bounded-covariance sampler's output is mapped back.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Protocol

import numpy as np

from privsample.budget import PrivacyBudget
from privsample.errors import InvalidInputError
from privsample.gaussian import (
    SamplerOutcome,
    bounded_cov_sampler,
    derive_bounded_cov_params,
    derive_known_cov_params,
    spherical_gaussian_sampler,
)
from privsample.noise import StlapParams, stlap_sample
from privsample.numerics import inv_sqrt_psd, sqrt_psd, symmetrize
from privsample.privacy.accounting import per_step_eps
from privsample.profile import ConstantsProfile

# Radius of the returned ball in units of r. Each coordinate of the centre is
# within one bucket (width 2r/sqrt(d)) of the cluster on the good event, so the
# centre is within 2r of it; 6 leaves a factor-3 margin.
C_BALL = 6.0

LEARNER_ACCURACY = 0.001
UNBOUNDED_KAPPA = 4.0


# --- densest ball -------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidInputError(f"ball radius must be positive, got {self.radius}")

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius


def coordinate_budget(budget: PrivacyBudget, d: int) -> tuple[float, float]:
    """Per-coordinate (eps0, delta0) whose d-fold composition fits `budget`.

    delta0 = delta / (2d); the remaining delta / 2 is the advanced-composition
    slack. eps0 is the better of eps / d and the advanced-composition solution.
    """
    if budget.delta <= 0:
        raise InvalidInputError("the histogram needs delta > 0")
    return per_step_eps(budget.eps, d, min(budget.delta / 2, 0.5)), budget.delta / (2 * d)


def densest_ball_sample_size(d: int, budget: PrivacyBudget, beta: float) -> int:
    """Heuristic row count for :func:`densest_ball_rough_mean`.

    A bucket can win only if its count beats the 2s-wide STLap support; three
    times that plus a union-bound term over d coordinates.
    """
    eps0, delta0 = coordinate_budget(budget, d)
    s = StlapParams(eps0 / 2, delta0 / 2, 1.0).shift
    return math.ceil(3 * (2 * s + (2 / eps0) * math.log(d / beta)))


def densest_ball_rough_mean(
    data,
    r: float,
    budget: PrivacyBudget,
    beta: float,
    rng: np.random.Generator,
    grid_offset=None,
) -> Ball:
    """Private rough centre from per-coordinate noisy histograms.

    Each coordinate is bucketed into intervals of width 2r/sqrt(d) anchored at
    `grid_offset`. Every non-empty bucket count gets independent
    STLap(eps0/2, delta0/2, 1) noise (a substituted row moves two counts);
    buckets whose noisy count stays positive are eligible and the eligible
    argmax's midpoint becomes that coordinate of the centre. With no eligible
    bucket the coordinate falls back to the grid anchor.

    `beta` only enters through :func:`densest_ball_sample_size`; it is
    accepted here so callers can record it alongside the result.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInputError(f"expected a non-empty (n, d) matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("data has non-finite entries")
    if not r > 0:
        raise InvalidInputError(f"r must be positive, got {r}")
    if not 0 < beta < 1:
        raise InvalidInputError(f"beta must lie in (0, 1), got {beta}")
    d = X.shape[1]
    offset = np.zeros(d) if grid_offset is None else np.asarray(grid_offset, dtype=float)
    if offset.shape != (d,):
        raise InvalidInputError("grid_offset must have one entry per coordinate")
    eps0, delta0 = coordinate_budget(budget, d)
    noise = StlapParams(eps0 / 2, delta0 / 2, 1.0)
    width = 2 * r / math.sqrt(d)
    center = offset.copy()
    for j in range(d):
        idx = np.floor((X[:, j] - offset[j]) / width).astype(np.int64)
        buckets, counts = np.unique(idx, return_counts=True)
        noisy = counts + stlap_sample(noise, rng, size=len(buckets))
        eligible = noisy > 0
        if np.any(eligible):
            best = buckets[eligible][np.argmax(noisy[eligible])]
            center[j] = offset[j] + (best + 0.5) * width
    return Ball(center, C_BALL * r)


# --- bounded mean reduction ---------------------------------------------------

# inner(rows, budget, R, rng) -> vector
BoundedMeanSampler = Callable[[np.ndarray, PrivacyBudget, float, np.random.Generator], np.ndarray]


def known_cov_inner(alpha: float, profile: ConstantsProfile) -> BoundedMeanSampler:
    """Algorithm-1 inner sampler (identity covariance) for the mean reduction."""

    def run(rows, budget, R, rng):
        params = derive_known_cov_params(rows.shape[1], R, budget, alpha, profile)
        if rows.shape[0] < params.n:
            raise InvalidInputError(f"inner sampler needs {params.n} rows, got {rows.shape[0]}")
        return spherical_gaussian_sampler(rows[:params.n], params, rng)

    return run


def rough_mean_rows(d: int, budget: PrivacyBudget, alpha: float) -> int:
    """n1 = max(n_dens(d, alpha/4, eps/2, delta/2), 100 ln(4/alpha))."""
    half = budget.split(2)
    return max(densest_ball_sample_size(d, half, alpha / 4), math.ceil(100 * math.log(4 / alpha)))


def bounded_mean_reduction(
    data,
    kappa: float,
    budget: PrivacyBudget,
    alpha: float,
    inner: BoundedMeanSampler,
    rng: np.random.Generator,
    profile: ConstantsProfile | None = None,
    r: float | None = None,
    n_rough: int | None = None,
    grid_offset=None,
) -> np.ndarray:
    """Sampler without a mean-norm bound, via a rough centre and a shift.

    The first `n_rough` rows (default :func:`rough_mean_rows`) feed the
    densest-ball stage at budget/2; the rest are shifted by the centre c and
    passed to `inner` at budget/2 with R = C_BALL r. Returns c + inner output.
    The default radius is r = m C kappa sqrt(d) with m the ``densest_ball.r``
    multiplier.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError(f"expected an (n, d) matrix, got shape {X.shape}")
    d = X.shape[1]
    profile = profile or ConstantsProfile.practical()
    if r is None:
        r = profile.multiplier("densest_ball.r") * profile.C * kappa * math.sqrt(d)
    n1 = rough_mean_rows(d, budget, alpha) if n_rough is None else int(n_rough)
    if X.shape[0] <= n1:
        raise InvalidInputError(f"need more than {n1} rows for the two stages, got {X.shape[0]}")
    half = budget.split(2)
    ball = densest_ball_rough_mean(X[:n1], r, half, alpha / 4, rng, grid_offset=grid_offset)
    y = inner(X[n1:] - ball.center, half, ball.radius, rng)
    return ball.center + np.asarray(y, dtype=float)


def bounded_mean_stage_budgets(budget: PrivacyBudget) -> tuple[PrivacyBudget, PrivacyBudget]:
    """Budgets of the rough-centre and sampling stages; they sum to `budget`."""
    return budget.split(2), budget.split(2)


# --- learners -----------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class LearnerEstimate:
    mu_hat: np.ndarray
    sigma_hat: np.ndarray

    def __post_init__(self):
        sigma = symmetrize(self.sigma_hat)
        inv_sqrt_psd(sigma)  # raises SingularMatrixError unless positive definite
        object.__setattr__(self, "sigma_hat", sigma)
        object.__setattr__(self, "mu_hat", np.asarray(self.mu_hat, dtype=float))


class DpLearner(Protocol):
    """Gaussian learner contract used by :func:`unbounded_cov_sampler`.

    `is_private` must be False for any stand-in that is not differentially
    private; the flag is copied into every report.
    """

    name: str
    is_private: bool

    def sample_complexity(self, d: int, budget: PrivacyBudget, accuracy: float, beta: float) -> int: ...

    def fit(self, data: np.ndarray, budget: PrivacyBudget, accuracy: float, beta: float) -> LearnerEstimate: ...


def empirical_mean_cov(data) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased sample covariance, with no conditioning checks."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidInputError("need an (n, d) matrix with n >= 2")
    return X.mean(axis=0), np.atleast_2d(np.cov(X, rowvar=False))


def empirical_gaussian_learner(data) -> LearnerEstimate:
    """Sample mean and covariance; not differentially private."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < X.shape[1] + 1:
        raise InvalidInputError("need at least d + 1 rows")
    mu, cov = empirical_mean_cov(X)
    return LearnerEstimate(mu, cov)


@dataclasses.dataclass(frozen=True)
class EmpiricalLearner:
    """:func:`empirical_gaussian_learner` behind the learner contract."""

    rows: int = 2000
    name: str = "empirical-gaussian"
    is_private: bool = False

    def sample_complexity(self, d, budget, accuracy, beta):
        return max(self.rows, d + 1)

    def fit(self, data, budget, accuracy, beta):
        return empirical_gaussian_learner(data)


@dataclasses.dataclass(frozen=True)
class OracleLearner:
    """Returns fixed parameters and reads no rows; for tests and calibration."""

    mu: np.ndarray
    sigma: np.ndarray
    name: str = "exact-oracle"
    is_private: bool = False

    def sample_complexity(self, d, budget, accuracy, beta):
        return 0

    def fit(self, data, budget, accuracy, beta):
        return LearnerEstimate(np.asarray(self.mu, dtype=float), np.asarray(self.sigma, dtype=float))


# --- unbounded covariance -----------------------------------------------------

# inner(rows, budget, rng) -> SamplerOutcome
BoundedCovSampler = Callable[[np.ndarray, PrivacyBudget, np.random.Generator], SamplerOutcome]


def bounded_cov_inner(
    alpha: float, profile: ConstantsProfile, R: float = 1.0, n2: int | None = None
) -> BoundedCovSampler:
    """Algorithm-2 inner sampler with kappa = 4 for the covariance reduction.

    `R` bounds the norm of the whitened mean, which a 0.001-accurate learner
    keeps far below 1.
    """

    def run(rows, budget, rng):
        params = derive_bounded_cov_params(rows.shape[1], R, UNBOUNDED_KAPPA, budget, alpha,
                                           profile, n2=n2)
        if rows.shape[0] < params.rows:
            raise InvalidInputError(f"inner sampler needs {params.rows} rows, got {rows.shape[0]}")
        return bounded_cov_sampler(rows[:params.rows], params, budget, rng)

    return run


def whiten_for_reduction(rows, estimate: LearnerEstimate) -> np.ndarray:
    """2 sigma_hat^{-1/2} (X - mu_hat), row-wise."""
    return 2.0 * (np.asarray(rows, dtype=float) - estimate.mu_hat) @ inv_sqrt_psd(estimate.sigma_hat)


def unwhiten_from_reduction(y, estimate: LearnerEstimate) -> np.ndarray:
    """0.5 sigma_hat^{1/2} y + mu_hat."""
    return 0.5 * sqrt_psd(estimate.sigma_hat) @ np.asarray(y, dtype=float) + estimate.mu_hat


def unbounded_cov_sampler(
    data,
    budget: PrivacyBudget,
    alpha: float,
    learner: DpLearner,
    inner: BoundedCovSampler,
    rng: np.random.Generator,
) -> SamplerOutcome:
    """Gaussian sampler with no covariance bound.

    The learner sees the first n1 = learner.sample_complexity(d, budget/2,
    0.001, alpha/2) rows at budget/2; the remaining rows are whitened by
    :func:`whiten_for_reduction` and given to `inner` at budget/2. Bottom from
    the inner sampler is returned as is, never retried.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError(f"expected an (n, d) matrix, got shape {X.shape}")
    d = X.shape[1]
    half = budget.split(2)
    n1 = learner.sample_complexity(d, half, LEARNER_ACCURACY, alpha / 2)
    if X.shape[0] <= n1:
        raise InvalidInputError(f"need more than {n1} rows, got {X.shape[0]}")
    estimate = learner.fit(X[:n1], half, LEARNER_ACCURACY, alpha / 2)
    out = inner(whiten_for_reduction(X[n1:], estimate), half, rng)
    diagnostics = dict(out.diagnostics)
    diagnostics.update({"learner": learner.name, "learner_private": bool(learner.is_private),
                        "learner_rows": n1})
    if out.is_bottom:
        return SamplerOutcome(None, diagnostics)
    return SamplerOutcome(unwhiten_from_reduction(out.value, estimate), diagnostics)
