"""Two-sample tests and small statistical helpers used for verification."""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist, pdist

from privsample.errors import InvalidInputError


@dataclasses.dataclass(frozen=True)
class TwoSampleResult:
    statistic: float
    p_value: float
    method: str

    def rejects(self, level: float) -> bool:
        return self.p_value < level


def _energy_u_statistic(x: np.ndarray, y: np.ndarray) -> float:
    # unbiased: 2 E|X-Y| - E|X-X'| - E|Y-Y'|, with i != j in the within-sample terms
    return 2.0 * cdist(x, y).mean() - pdist(x).mean() - pdist(y).mean()


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidInputError(f"samples must be 1-d or 2-d, got shape {a.shape}")
    return a


def energy_block_test(x, y, block_size: int | None = None) -> TwoSampleResult:
    """Energy-distance two-sample test by averaging block U-statistics.

    Both samples are cut into aligned blocks of `block_size`; the unbiased energy
    statistic is computed per block and the block values are combined with a
    one-sided t-test (the statistic is zero-mean under the null and positive
    under any alternative). Cost is linear in the sample size, which makes
    10^4-vs-10^4 comparisons cheap. The default block size (at most 500, at
    least ten blocks) keeps the t approximation calibrated.
    """
    x, y = _as_2d(x), _as_2d(y)
    if x.shape[1] != y.shape[1]:
        raise InvalidInputError("samples have different dimensions")
    n = min(len(x), len(y))
    if block_size is None:
        block_size = max(10, min(500, n // 10))
    n_blocks = n // block_size
    if n_blocks < 2:
        raise InvalidInputError("need at least two full blocks per sample")
    vals = np.array([
        _energy_u_statistic(x[k * block_size:(k + 1) * block_size],
                            y[k * block_size:(k + 1) * block_size])
        for k in range(n_blocks)
    ])
    se = vals.std(ddof=1) / np.sqrt(n_blocks)
    t = vals.mean() / se if se > 0 else 0.0
    return TwoSampleResult(float(vals.mean()), float(stats.t.sf(t, n_blocks - 1)), "energy-block")


def energy_permutation_test(x, y, n_permutations: int = 500, rng=None) -> TwoSampleResult:
    """Classical permutation energy test; quadratic memory, for small samples."""
    x, y = _as_2d(x), _as_2d(y)
    rng = np.random.default_rng(rng)
    pooled = np.vstack([x, y])
    D = cdist(pooled, pooled)
    n, m = len(x), len(y)

    def stat(idx):
        a, b = idx[:n], idx[n:]
        return (2.0 * D[np.ix_(a, b)].mean() - D[np.ix_(a, a)].sum() / (n * (n - 1))
                - D[np.ix_(b, b)].sum() / (m * (m - 1)))

    base = np.arange(n + m)
    observed = stat(base)
    exceed = sum(stat(rng.permutation(n + m)) >= observed for _ in range(n_permutations))
    return TwoSampleResult(float(observed), (exceed + 1) / (n_permutations + 1), "energy-permutation")


def clopper_pearson(k: int, n: int, confidence: float) -> tuple[float, float]:
    """Two-sided exact binomial interval at the given confidence."""
    if n <= 0:
        raise InvalidInputError("need at least one trial")
    a = 1.0 - confidence
    lo = 0.0 if k == 0 else stats.beta.ppf(a / 2, k, n - k + 1)
    hi = 1.0 if k == n else stats.beta.ppf(1 - a / 2, k + 1, n - k)
    return float(lo), float(hi)


def clopper_pearson_one_sided(k: int, n: int, confidence: float, upper: bool) -> float:
    """One-sided exact binomial bound (upper if `upper`, else lower)."""
    if n <= 0:
        raise InvalidInputError("need at least one trial")
    a = 1.0 - confidence
    if upper:
        return 1.0 if k == n else float(stats.beta.ppf(1 - a, k + 1, n - k))
    return 0.0 if k == 0 else float(stats.beta.ppf(a, k, n - k + 1))


def empirical_bernstein_interval(values, confidence: float, value_range: float = 1.0):
    """Mean and empirical-Bernstein interval for i.i.d. values in [0, value_range]."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 2:
        raise InvalidInputError("need at least two values")
    # Maurer-Pontil bound, union over both tails
    log_term = np.log(4.0 / (1.0 - confidence))
    var = v.var(ddof=1)
    half = np.sqrt(2.0 * var * log_term / n) + 7.0 * value_range * log_term / (3.0 * (n - 1))
    mean = float(v.mean())
    return mean, (max(mean - half, 0.0), min(mean + half, value_range))
