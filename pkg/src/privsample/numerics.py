"""Deterministic numeric primitives shared by the samplers.

Truncation to norm balls, scalar clipping and the few symmetric-matrix
functionals the samplers need. Everything here is a pure function.
"""

from __future__ import annotations

import numpy as np

from privsample.errors import InvalidInputError, SingularMatrixError

SYMMETRY_RTOL = 1e-9
PSD_RTOL = 1e-9


def _as_finite_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInputError(f"expected a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("vector has non-finite entries")
    return x


def _row_norms(X: np.ndarray, p: int = 2, weights=None) -> np.ndarray:
    # one code path for single vectors and row blocks keeps results bit-identical
    if weights is not None:
        return np.sum(np.abs(X * weights), axis=-1)
    if p == 1:
        return np.sum(np.abs(X), axis=-1)
    if p == 2:
        return np.sqrt(np.sum(X * X, axis=-1))
    raise InvalidInputError(f"norm order must be 1 or 2, got {p}")


def _rescale_rows(X: np.ndarray, bound: float, p: int = 2, weights=None) -> np.ndarray:
    """Radially shrink every row of `X` whose norm exceeds `bound`.

    The scale factor is nudged down ulp by ulp until the computed norm is at
    most `bound`, so that a second application is an exact no-op.
    """
    out = X.copy()
    norms = _row_norms(X, p, weights)
    idx = np.flatnonzero(norms > bound)
    if idx.size == 0:
        return out
    scale = bound / norms[idx]
    out[idx] = X[idx] * scale[:, None]
    over = _row_norms(out[idx], p, weights) > bound
    while np.any(over):
        idx, scale = idx[over], np.nextafter(scale[over], 0.0)
        out[idx] = X[idx] * scale[:, None]
        over = _row_norms(out[idx], p, weights) > bound
    return out


def trunc_lp(x, bound: float, p: int = 2) -> np.ndarray:
    """Project `x` radially into the l_p ball of radius `bound`.

    Returns `x` unchanged when its l_p norm is at most `bound`, and
    `x * bound / ||x||_p` otherwise.

    Args:
        x: Vector to truncate.
        bound: Positive radius.
        p: Norm order, 1 or 2.

    Returns:
        A new array whose l_p norm is at most `bound`.
    """
    x = _as_finite_vector(x)
    if not bound > 0:
        raise InvalidInputError(f"truncation radius must be positive, got {bound}")
    if p not in (1, 2):
        raise InvalidInputError(f"norm order must be 1 or 2, got {p}")
    return _rescale_rows(x[None, :], float(bound), p)[0]


def trunc_weighted_l1(x, bound: float, weights) -> np.ndarray:
    """Truncate `x` so that ||x * weights||_1 <= bound, scaling radially."""
    x = _as_finite_vector(x)
    w = np.asarray(weights, dtype=float)
    if w.shape != x.shape:
        raise InvalidInputError(f"weights shape {w.shape} does not match x shape {x.shape}")
    if np.any(w < 0):
        raise InvalidInputError("weights must be nonnegative")
    if not bound > 0:
        raise InvalidInputError(f"truncation radius must be positive, got {bound}")
    return _rescale_rows(x[None, :], float(bound), weights=w)[0]


def trunc_rows(X, bound: float, p: int = 2, weights=None) -> np.ndarray:
    """Row-wise version of `trunc_lp` / `trunc_weighted_l1` for an (n, d) array.

    Produces exactly the same rows as applying the single-vector functions to
    each row.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError(f"expected a 2-d array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("matrix has non-finite entries")
    if not bound > 0:
        raise InvalidInputError(f"truncation radius must be positive, got {bound}")
    w = None
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (X.shape[1],):
            raise InvalidInputError("weights length does not match row dimension")
    elif p not in (1, 2):
        raise InvalidInputError(f"norm order must be 1 or 2, got {p}")
    return _rescale_rows(X, float(bound), p, w)


def clip_scalar(x: float, lo: float, hi: float) -> float:
    """max(lo, min(hi, x))."""
    if lo > hi:
        raise InvalidInputError(f"clip interval is empty: ({lo}, {hi})")
    return max(lo, min(hi, x))


def _check_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    return M


def symmetrize(M) -> np.ndarray:
    """Check near-symmetry (relative tolerance 1e-9) and return (M + M^T) / 2."""
    M = _check_square(M)
    scale = float(np.max(np.abs(M))) if M.size else 0.0
    asym = float(np.max(np.abs(M - M.T)))
    if asym > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise InvalidInputError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    return 0.5 * (M + M.T)


def min_eigenvalue(M) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    M = symmetrize(M)
    return float(np.linalg.eigvalsh(M)[0])


def _psd_eig(sigma):
    sigma = symmetrize(sigma)
    if np.count_nonzero(sigma - np.diag(np.diag(sigma))) == 0:
        vals = np.diag(sigma).copy()
        vecs = None
    else:
        vals, vecs = np.linalg.eigh(sigma)
    top = float(np.max(vals))
    if top <= 0 or float(np.min(vals)) <= PSD_RTOL * top:
        raise SingularMatrixError(
            f"matrix is not strictly positive definite (eigenvalues in [{np.min(vals):.3g}, {top:.3g}])"
        )
    return vals, vecs


def _apply_spectral(vals, vecs, fn) -> np.ndarray:
    if vecs is None:
        return np.diag(fn(vals))
    out = (vecs * fn(vals)) @ vecs.T
    return 0.5 * (out + out.T)


def inv_sqrt_psd(sigma) -> np.ndarray:
    """Symmetric inverse square root of a positive definite matrix."""
    vals, vecs = _psd_eig(sigma)
    return _apply_spectral(vals, vecs, lambda v: 1.0 / np.sqrt(v))


def sqrt_psd(sigma) -> np.ndarray:
    """Symmetric square root of a positive definite matrix."""
    vals, vecs = _psd_eig(sigma)
    return _apply_spectral(vals, vecs, np.sqrt)


def psd_sqrt_factor(sigma) -> np.ndarray:
    """A matrix A with A A^T = sigma, for any PSD sigma (singular allowed).

    Negative eigenvalues within the PSD tolerance are clamped to zero.
    """
    sigma = symmetrize(sigma)
    vals, vecs = np.linalg.eigh(sigma)
    top = max(float(np.max(vals)), 0.0)
    if float(np.min(vals)) < -PSD_RTOL * max(top, 1.0):
        raise InvalidInputError("covariance matrix is not positive semidefinite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def mahalanobis_norm(A, sigma) -> float:
    """Frobenius norm of sigma^{-1/2} A sigma^{-1/2}."""
    A = symmetrize(A)
    S = inv_sqrt_psd(sigma)
    if S.shape != A.shape:
        raise InvalidInputError(f"shape mismatch: {A.shape} vs {S.shape}")
    return float(np.linalg.norm(S @ A @ S, "fro"))
