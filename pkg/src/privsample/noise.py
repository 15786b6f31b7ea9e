"""Noise distributions used by the samplers.

All samplers take an explicit ``numpy.random.Generator``; nothing here touches
global random state.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import integrate, special

from privsample.errors import InvalidInputError
from privsample.numerics import psd_sqrt_factor


def make_rng(seed=None) -> np.random.Generator:
    """Reproducible generator; same seed gives the same draw sequence."""
    return np.random.default_rng(seed)


@dataclasses.dataclass(frozen=True)
class StlapParams:
    """Shifted truncated discrete Laplace on the integers [-2s, 0].

    The pmf is proportional to exp(-eps * |x + s|) with
    s = ceil(sensitivity * (1 + ln(1/delta) / eps)).
    """

    eps: float
    delta: float
    sensitivity: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidInputError(f"eps must be positive, got {self.eps}")
        if not 0 < self.delta < 1:
            raise InvalidInputError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.sensitivity > 0:
            raise InvalidInputError(f"sensitivity must be positive, got {self.sensitivity}")

    @property
    def shift(self) -> int:
        return int(math.ceil(self.sensitivity * (1.0 + math.log(1.0 / self.delta) / self.eps)))

    @property
    def support(self) -> tuple[int, int]:
        return -2 * self.shift, 0

    def _log_normalizer(self) -> float:
        # Z = 1 + 2 * sum_{j=1..s} q^j with q = exp(-eps)
        s, eps = self.shift, self.eps
        tail = 2.0 * math.exp(-eps) * (-math.expm1(-eps * s)) / (-math.expm1(-eps))
        return math.log1p(tail)


def stlap_pmf(params: StlapParams, x: int) -> float:
    """Probability mass of `x` under STLap(eps, delta, sensitivity)."""
    lo, hi = params.support
    if x < lo or x > hi or x != int(x):
        return 0.0
    return math.exp(-params.eps * abs(x + params.shift) - params._log_normalizer())


def stlap_sample(params: StlapParams, rng: np.random.Generator, size=None):
    """Exact inverse-CDF draw from STLap; every value lies in [-2s, 0].

    The centred variable t = x + s is symmetric with P(|t| = 0) = 1/Z and
    P(|t| = k) = 2 q^k / Z for 1 <= k <= s. The magnitude is drawn by inverting
    a truncated geometric CDF in closed form, which stays exact even when s is
    far too large to tabulate the support.
    """
    s, eps = params.shift, params.eps
    shape = () if size is None else size
    p_zero = math.exp(-params._log_normalizer())
    u = rng.random(shape)
    w = rng.random(shape)
    sign = np.where(rng.random(shape) < 0.5, -1, 1)
    # truncated geometric on {0, .., s-1}: j = floor(log(1 - w (1 - q^s)) / log q)
    j = np.floor(np.log1p(w * math.expm1(-eps * s)) / -eps)
    j = np.clip(j, 0, s - 1)
    mag = np.where(u < p_zero, 0.0, j + 1.0)
    if size is None:
        return int(sign) * int(mag) - s
    if 2 * s < 2 ** 53:
        return (sign * mag.astype(np.int64) - s).astype(np.int64)
    # beyond exact float range the integers cannot all be represented anyway
    return sign * mag - float(s)


def laplace_sample(scale: float, rng: np.random.Generator, size=None):
    """Centred Laplace draw with density proportional to exp(-|x| / scale)."""
    if not scale > 0:
        raise InvalidInputError(f"Laplace scale must be positive, got {scale}")
    return rng.laplace(0.0, scale, size)


def gaussian_vector_sample(mu, sigma, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw from N(mu, sigma) as sigma^{1/2} z + mu; sigma may be singular."""
    mu = np.asarray(mu, dtype=float)
    A = psd_sqrt_factor(sigma)
    if A.shape[0] != mu.shape[0]:
        raise InvalidInputError("mean and covariance dimensions differ")
    shape = (mu.shape[0],) if size is None else (size, mu.shape[0])
    z = rng.standard_normal(shape)
    return z @ A.T + mu


def unit_sphere_sample(q: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Uniform draw from the unit sphere in R^q (normalised Gaussian)."""
    if q < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {q}")
    shape = (q,) if size is None else (size, q)
    while True:
        g = rng.standard_normal(shape)
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.all(norms > 0):
            return g / norms


def _projected_sphere_log_normalizer(d: int, i: int, method: str) -> float:
    # log of 1 / integral over the unit i-ball of (1 - |z|^2)^{(d-i)/2 - 1}
    if method == "closed_form":
        return special.gammaln(d / 2) - special.gammaln((d - i) / 2) - (i / 2) * math.log(math.pi)
    if method == "quadrature":
        a = (d - i) / 2 - 1
        surface = 2 * math.pi ** (i / 2) / math.gamma(i / 2)
        val, _ = integrate.quad(
            lambda r: r ** (i - 1) * (1 - r * r) ** a, 0.0, 1.0, epsabs=0, epsrel=1e-10, limit=200
        )
        return -math.log(surface * val)
    raise InvalidInputError(f"unknown normalisation method {method!r}")


def projected_sphere_logpdf(d: int, i: int, z, method: str = "closed_form") -> float:
    """Log density of the first `i` coordinates of a uniform unit vector in R^d.

    The density is proportional to (1 - |z|^2)^{(d-i)/2 - 1} on the open unit
    ball and zero outside.
    """
    if not 1 <= i < d:
        raise InvalidInputError(f"need 1 <= i < d, got i={i}, d={d}")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape[-1] != i:
        raise InvalidInputError(f"point has dimension {z.shape[-1]}, expected {i}")
    r2 = float(np.dot(z, z))
    if r2 >= 1.0:
        return -math.inf
    log_c = _projected_sphere_log_normalizer(d, i, method)
    return log_c + ((d - i) / 2 - 1) * math.log1p(-r2)
