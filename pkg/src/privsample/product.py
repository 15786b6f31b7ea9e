"""Pure-DP sampler for product distributions on {0,1}^d.

Three stages, each on fresh rows: a Laplace flip step that maps every marginal
to at most about 3/4, a bucket preconditioner that pins each p_j to within a
constant factor of 2^{-l_j}, and the sampler proper, which releases one draw
from a product of clipped Bernoullis built from the weighted-truncated mean.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np

from privsample.budget import PrivacyBudget
from privsample.errors import InvalidInputError
from privsample.noise import laplace_sample
from privsample.numerics import trunc_rows
from privsample.profile import ConstantsProfile

FLIP_THRESHOLD = 0.75
BUCKET_THRESHOLD = 0.57

# supplier(n) -> (n, d) bit matrix of fresh rows
RowSupplier = Callable[[int], np.ndarray]


def as_bit_matrix(data) -> np.ndarray:
    X = np.asarray(data)
    if X.ndim != 2 or X.shape[1] == 0:
        raise InvalidInputError(f"expected an (n, d) bit matrix, got shape {X.shape}")
    if X.size and not np.all((X == 0) | (X == 1)):
        raise InvalidInputError("bit matrix has entries outside {0, 1}")
    return X.astype(np.int8)


class ArraySupplier:
    """Hands out consecutive, never-reused row blocks of a fixed matrix."""

    def __init__(self, data):
        self._data = as_bit_matrix(data)
        self._pos = 0

    @property
    def remaining(self) -> int:
        return self._data.shape[0] - self._pos

    def __call__(self, n: int) -> np.ndarray:
        if n > self.remaining:
            raise InvalidInputError(f"supplier exhausted: asked for {n} rows, {self.remaining} left")
        block = self._data[self._pos:self._pos + n]
        self._pos += n
        return block


class BernoulliSupplier:
    """Fresh rows from the product distribution with marginals `p`."""

    def __init__(self, p, rng: np.random.Generator):
        self.p = np.asarray(p, dtype=float)
        if self.p.ndim != 1 or np.any((self.p < 0) | (self.p > 1)):
            raise InvalidInputError("p must be a vector of probabilities")
        self._rng = rng
        self.rows_drawn = 0

    def __call__(self, n: int) -> np.ndarray:
        self.rows_drawn += n
        return (self._rng.random((n, self.p.size)) < self.p).astype(np.int8)


def _fetch(supplier: RowSupplier, n: int, d: int) -> np.ndarray:
    X = as_bit_matrix(supplier(n))
    if X.shape != (n, d):
        raise InvalidInputError(f"supplier returned shape {X.shape}, expected {(n, d)}")
    return X


# --- flip ---------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class FlipMask:
    flipped: np.ndarray

    def apply(self, bits) -> np.ndarray:
        """XOR rows (or a single vector) with the mask; an involution."""
        b = np.asarray(bits)
        return np.where(self.flipped, 1 - b, b).astype(b.dtype)

    def unflip_probs(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.where(self.flipped, 1.0 - p, p)


def flip_preprocess(data, eps_flip: float, rng: np.random.Generator) -> tuple[FlipMask, np.ndarray]:
    """Flip every coordinate whose Laplace-noised mean exceeds 3/4.

    A substituted row moves each of the d coordinate means by at most 1/n, so
    the vector of means has l1 sensitivity d/n and per-coordinate noise of
    scale d/(n eps_flip) makes the mask eps_flip-DP.
    """
    X = as_bit_matrix(data)
    n, d = X.shape
    if n == 0:
        raise InvalidInputError("flip step needs at least one row")
    if not eps_flip > 0:
        raise InvalidInputError(f"eps_flip must be positive, got {eps_flip}")
    noisy = X.mean(axis=0) + laplace_sample(d / (n * eps_flip), rng, size=d)
    mask = FlipMask(noisy > FLIP_THRESHOLD)
    return mask, mask.apply(X)


# --- preconditioner -----------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class BucketAssignment:
    """Per-coordinate bucket indices in {0, ..., L}.

    Attributes:
        ell: Integer bucket per coordinate.
        L: Top index; l_j = L means p_j is below alpha / (2d).
        active_sets: Coordinates still unassigned at the start of each round.
    """

    ell: np.ndarray
    L: int
    active_sets: tuple = ()

    def __post_init__(self):
        ell = np.asarray(self.ell, dtype=np.int64)
        if ell.ndim != 1 or np.any((ell < 0) | (ell > self.L)):
            raise InvalidInputError(f"bucket indices must lie in [0, {self.L}]")
        object.__setattr__(self, "ell", ell)

    @property
    def weights(self) -> np.ndarray:
        return np.ldexp(1.0, self.ell)

    def interval(self, j: int) -> tuple[float, float]:
        """Range the preconditioner certifies for p_j."""
        if self.ell[j] == self.L:
            return 0.0, 0.75 * 2.0 ** -self.L
        return 0.25 * 2.0 ** -self.ell[j], 0.75 * 2.0 ** -self.ell[j]


@dataclasses.dataclass(frozen=True)
class PreconditionerParams:
    d: int
    eps: float
    alpha: float
    beta: float
    scale: float

    def __post_init__(self):
        if self.d < 1 or not self.eps > 0 or not 0 < self.alpha <= 0.5 or not 0 < self.beta < 1:
            raise InvalidInputError("need d >= 1, eps > 0, alpha in (0, 1/2], beta in (0, 1)")

    @property
    def L(self) -> int:
        return math.ceil(math.log2(2 * self.d / self.alpha))

    def B(self, ell: int) -> float:
        """B_l = m (d 2^-l + 1)."""
        return self.scale * (self.d * 2.0 ** -ell + 1)

    def n(self, ell: int) -> int:
        """n_l = ceil((m / eps) B_l 2^l ln(d / (alpha beta)))."""
        return math.ceil(
            self.scale / self.eps * self.B(ell) * 2.0 ** ell * math.log(self.d / (self.alpha * self.beta))
        )

    def threshold(self, ell: int) -> float:
        return BUCKET_THRESHOLD * 2.0 ** -ell

    def total_rows(self, literal: bool = False) -> int:
        off = 0 if literal else 1
        return sum(self.n(t + off) for t in range(self.L))

    def as_dict(self) -> dict:
        return {
            "d": self.d, "eps": self.eps, "alpha": self.alpha, "beta": self.beta, "L": self.L,
            "B_l": [self.B(t) for t in range(self.L + 1)],
            "n_l": [self.n(t) for t in range(self.L + 1)],
        }


def derive_preconditioner_params(d: int, eps: float, alpha: float, beta: float,
                                 profile: ConstantsProfile) -> PreconditionerParams:
    return PreconditionerParams(d, eps, alpha, beta, profile.multiplier("product.scale"))


def preconditioner(
    supplier: RowSupplier,
    params: PreconditionerParams,
    rng: np.random.Generator,
    literal: bool = False,
) -> BucketAssignment:
    """Assign each coordinate a bucket by successively finer noisy means.

    Round t = 1..L draws n_t fresh rows, l1-truncates each row restricted to
    the still-active coordinates at B_t, and adds Laplace noise of scale
    2 B_t / eps to the column sums. Active coordinates whose noisy mean exceeds
    0.57 2^-t leave with l_j = t - 1; those left after round L get l_j = L.
    Each round touches only its own rows, so the whole procedure is eps-DP.

    With ``literal=True`` round l = 0..L-1 compares against 0.57 2^-l and
    assigns l_j = l instead; that variant places p_j in [0.5, 1.5] 2^-l_j
    rather than [0.25, 0.75] 2^-l_j and is kept for comparison only.
    """
    d, L = params.d, params.L
    ell = np.full(d, L, dtype=np.int64)
    active = np.arange(d)
    history = []
    for step in range(L):
        if active.size == 0:
            break
        history.append(tuple(int(j) for j in active))
        t = step if literal else step + 1
        B_t, n_t = params.B(t), params.n(t)
        X = _fetch(supplier, n_t, d)[:, active].astype(float)
        sums = trunc_rows(X, B_t, p=1).sum(axis=0)
        q = (sums + laplace_sample(2 * B_t / params.eps, rng, size=active.size)) / n_t
        leaving = q > params.threshold(t)
        ell[active[leaving]] = step
        active = active[~leaving]
    history.append(tuple(int(j) for j in active))
    return BucketAssignment(ell, L, tuple(history))


# --- sampler ------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ProductSamplerParams:
    B: float
    n: int
    eps: float

    def __post_init__(self):
        if not self.B > 0 or self.n < 1 or not self.eps > 0:
            raise InvalidInputError("need B > 0, n >= 1, eps > 0")

    @property
    def ratio_bound(self) -> float:
        """Pure-DP level the sampler actually certifies, 16 B / n."""
        return 16 * self.B / self.n

    def as_dict(self) -> dict:
        return {"B": self.B, "n": self.n, "eps": self.eps}


def derive_product_sampler_params(d: int, eps: float, alpha: float,
                                  profile: ConstantsProfile) -> ProductSamplerParams:
    """B = m (d / alpha) ln(d / alpha), n = ceil(16 B / eps); m = 1000 analytically."""
    if not 0 < alpha <= 0.5 or not eps > 0 or d < 1:
        raise InvalidInputError("need d >= 1, eps > 0, alpha in (0, 1/2]")
    B = profile.multiplier("product.scale") * (d / alpha) * math.log(d / alpha)
    return product_params_from_B(B, eps)


def product_params_from_B(B: float, eps: float) -> ProductSamplerParams:
    return ProductSamplerParams(B=B, n=math.ceil(16 * B / eps), eps=eps)


@dataclasses.dataclass(frozen=True)
class ClippedProductParams:
    p_tilde: np.ndarray
    w: np.ndarray
    q: np.ndarray


def weighted_truncated_mean(data, B: float, w) -> np.ndarray:
    """q = mean of trunc^1_{B,w}(X_i)."""
    X = as_bit_matrix(data).astype(float)
    return trunc_rows(X, B, weights=w).mean(axis=0)


def product_sampler_probs(data, buckets: BucketAssignment, params: ProductSamplerParams) -> ClippedProductParams:
    """Clipped marginals p~_j = clip(q_j, 1/(8 w_j), 7/(8 w_j)) with w_j = 2^{l_j}."""
    X = as_bit_matrix(data)
    if X.shape[0] != params.n:
        raise InvalidInputError(f"sampler needs exactly {params.n} rows, got {X.shape[0]}")
    if X.shape[1] != buckets.ell.size:
        raise InvalidInputError("bucket assignment and data dimension differ")
    w = buckets.weights
    q = weighted_truncated_mean(X, params.B, w)
    return ClippedProductParams(np.clip(q, 1 / (8 * w), 7 / (8 * w)), w, q)


def product_sampler(data, buckets: BucketAssignment, params: ProductSamplerParams,
                    rng: np.random.Generator) -> np.ndarray:
    """One draw from the product of Ber(p~_j)."""
    p = product_sampler_probs(data, buckets, params).p_tilde
    return (rng.random(p.size) < p).astype(np.int8)


# --- end to end ---------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ProductPipelineResult:
    """Everything the pipeline computed; `probs` are the released marginals."""

    probs: np.ndarray
    mask: FlipMask
    buckets: BucketAssignment
    sampler: ProductSamplerParams
    precond: PreconditionerParams
    stage_budgets: tuple
    rows_used: int

    def draw(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = (self.probs.size,) if size is None else (size, self.probs.size)
        return (rng.random(shape) < self.probs).astype(np.int8)


def end_to_end_product_distribution(
    supplier: RowSupplier,
    d: int,
    budget: PrivacyBudget,
    alpha: float,
    rng: np.random.Generator,
    profile: ConstantsProfile | None = None,
) -> ProductPipelineResult:
    """Flip, precondition and clip; returns the final product distribution.

    The budget is split eps/3 per stage. Accuracy is split alpha/2 to the
    preconditioner (with beta = alpha / (24 d)) and alpha/2 to the sampler.
    The flip step reads as many rows as the sampler stage.
    """
    if budget.delta != 0:
        raise InvalidInputError("the product sampler is pure DP; pass delta = 0")
    profile = profile or ConstantsProfile.practical()
    stage = PrivacyBudget(budget.eps / 3)
    sampler = derive_product_sampler_params(d, stage.eps, alpha / 2, profile)
    precond = derive_preconditioner_params(d, stage.eps, alpha / 2, alpha / (24 * d), profile)
    counter = _CountingSupplier(supplier)
    mask, _ = flip_preprocess(_fetch(counter, sampler.n, d), stage.eps, rng)
    flipped = lambda n: mask.apply(_fetch(counter, n, d))  # noqa: E731
    buckets = preconditioner(flipped, precond, rng)
    clipped = product_sampler_probs(flipped(sampler.n), buckets, sampler)
    return ProductPipelineResult(
        probs=mask.unflip_probs(clipped.p_tilde), mask=mask, buckets=buckets, sampler=sampler,
        precond=precond, stage_budgets=(stage, stage, stage), rows_used=counter.count,
    )


def end_to_end_product_sampler(
    supplier: RowSupplier,
    d: int,
    budget: PrivacyBudget,
    alpha: float,
    rng: np.random.Generator,
    profile: ConstantsProfile | None = None,
) -> np.ndarray:
    """One eps-DP draw approximating the product distribution behind `supplier`."""
    return end_to_end_product_distribution(supplier, d, budget, alpha, rng, profile).draw(rng)


class _CountingSupplier:
    def __init__(self, inner: RowSupplier):
        self._inner = inner
        self.count = 0

    def __call__(self, n):
        self.count += n
        return self._inner(n)
