"""Covariance estimation from repeated private samples on random subsamples.

Each of L rounds draws n of the N rows without replacement and runs a sampler
on them; a centred-Gaussian learner fits the L outputs and the fit is replaced
by I unless 0.5 I <= fit <= 2.5 I. The privacy cost is per-round subsampling
amplification followed by advanced composition over the L rounds.
"""

from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from privsample.budget import PrivacyBudget
from privsample.errors import InvalidInputError
from privsample.numerics import symmetrize
from privsample.privacy.accounting import CompositionQuery, advanced_composition, subsampling_amplification

CLAMP_LOW = 0.5
CLAMP_HIGH = 2.5


@dataclasses.dataclass(frozen=True)
class EstimatorConfig:
    N: int
    n: int
    L: int
    xi: float = 0.01

    def __post_init__(self):
        if self.n < 1 or self.n > self.N:
            raise InvalidInputError(f"need 1 <= n <= N, got n={self.n}, N={self.N}")
        if self.L < 1:
            raise InvalidInputError(f"L must be >= 1, got {self.L}")
        if not 0 < self.xi <= 0.01:
            raise InvalidInputError(f"xi must lie in (0, 0.01], got {self.xi}")


def agnostic_centered_gaussian_learner(samples) -> np.ndarray:
    """Second-moment matrix (1/L) sum Y Y^T.

    A stand-in: it fits centred Gaussians consistently but carries none of the
    robustness of a minimum-distance agnostic learner.
    """
    Y = np.asarray(samples, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < Y.shape[1] + 1:
        raise InvalidInputError("need at least d + 1 samples")
    return symmetrize(Y.T @ Y / Y.shape[0])


def clamp_covariance(sigma_hat) -> tuple[np.ndarray, bool]:
    """(sigma_hat, False) if 0.5 I <= sigma_hat <= 2.5 I, else (I, True)."""
    S = symmetrize(sigma_hat)
    vals = np.linalg.eigvalsh(S)
    if vals[0] >= CLAMP_LOW and vals[-1] <= CLAMP_HIGH:
        return S, False
    return np.eye(S.shape[0]), True


def estimator_privacy_cost(sampler_budget: PrivacyBudget, config: EstimatorConfig,
                           delta_slack: float) -> PrivacyBudget:
    """Subsampling amplification per round, then advanced composition over L rounds."""
    per_round = subsampling_amplification(sampler_budget.eps, sampler_budget.delta, config.n, config.N)
    return advanced_composition(CompositionQuery(per_round.eps, per_round.delta, config.L, delta_slack))


@dataclasses.dataclass(frozen=True)
class EstimatorResult:
    estimate: np.ndarray
    raw_estimate: np.ndarray
    clamped: bool
    privacy: PrivacyBudget | None
    bottoms: int
    non_private_components: tuple


def covariance_estimator_pipeline(
    config: EstimatorConfig,
    sampler: Callable,
    learner: Callable,
    data,
    rng: np.random.Generator,
    sampler_budget: PrivacyBudget | None = None,
    delta_slack: float = 1e-6,
    learner_name: str = "empirical-second-moment",
    learner_is_stand_in: bool = True,
) -> EstimatorResult:
    """Run the subsample / sample / learn / clamp pipeline.

    `sampler(rows, rng)` returns one output vector or ``None`` (bottom);
    bottom rounds are dropped before learning. When `sampler_budget` is given
    the composed privacy cost is attached.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] != config.N:
        raise InvalidInputError(f"pipeline needs exactly N={config.N} rows")
    outputs = []
    for _ in range(config.L):
        idx = rng.choice(config.N, size=config.n, replace=False)
        y = sampler(X[idx], rng)
        if y is not None:
            outputs.append(np.asarray(y, dtype=float))
    if len(outputs) < X.shape[1] + 1:
        raise InvalidInputError("too few non-bottom rounds to fit a covariance")
    raw = learner(np.vstack(outputs))
    estimate, clamped = clamp_covariance(raw)
    privacy = None if sampler_budget is None else estimator_privacy_cost(sampler_budget, config, delta_slack)
    return EstimatorResult(
        estimate=estimate, raw_estimate=np.asarray(raw), clamped=clamped, privacy=privacy,
        bottoms=config.L - len(outputs),
        non_private_components=(learner_name,) if learner_is_stand_in else (),
    )
