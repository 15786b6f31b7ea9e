import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import random_psd
from privsample.errors import InvalidInputError, SingularMatrixError
from privsample.numerics import (
    clip_scalar,
    inv_sqrt_psd,
    mahalanobis_norm,
    min_eigenvalue,
    psd_sqrt_factor,
    symmetrize,
    trunc_lp,
    trunc_rows,
    trunc_weighted_l1,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vectors = hnp.arrays(np.float64, st.integers(1, 12), elements=finite)
radii = st.floats(1e-3, 1e4)


def test_trunc_lp_examples():
    np.testing.assert_array_equal(trunc_lp([3, 4], 10), [3, 4])
    np.testing.assert_allclose(trunc_lp([3, 4], 2.5), [1.5, 2.0], rtol=1e-15)
    np.testing.assert_allclose(trunc_lp([1, -1, 1], 1.5, p=1), [0.5, -0.5, 0.5], rtol=1e-15)


def test_trunc_weighted_examples():
    np.testing.assert_array_equal(trunc_weighted_l1([1, 1], 5, [2, 1]), [1, 1])
    np.testing.assert_allclose(trunc_weighted_l1([1, 1], 1.5, [2, 1]), [0.5, 0.5], rtol=1e-15)
    np.testing.assert_array_equal(trunc_weighted_l1([0, 0], 0.1, [3, 7]), [0, 0])


def test_trunc_errors():
    with pytest.raises(InvalidInputError):
        trunc_lp([1.0, np.nan], 1.0)
    with pytest.raises(InvalidInputError):
        trunc_lp([1.0, np.inf], 1.0)
    with pytest.raises(InvalidInputError):
        trunc_weighted_l1([1.0, 2.0], 1.0, [1.0])
    with pytest.raises(InvalidInputError):
        trunc_lp([1.0], 0.0)
    with pytest.raises(InvalidInputError):
        trunc_lp([1.0], 1.0, p=3)


@given(vectors, radii, st.sampled_from([1, 2]))
def test_trunc_idempotent_and_bounded(x, B, p):
    once = trunc_lp(x, B, p)
    np.testing.assert_array_equal(trunc_lp(once, B, p), once)
    assert np.linalg.norm(once, ord=p) <= B * (1 + 1e-12)


@given(vectors, radii, st.sampled_from([1, 2]))
def test_trunc_preserves_direction(x, B, p):
    out = trunc_lp(x, B, p)
    assert np.all(out * x >= 0)
    # subnormal entries cannot carry a relative scale factor
    nz = np.abs(x) >= np.finfo(float).tiny
    ratios = out[nz] / x[nz]
    if ratios.size:
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)
    assert np.all(out[x == 0] == 0)


@given(st.integers(1, 8).flatmap(lambda d: st.tuples(
    hnp.arrays(np.float64, d, elements=finite),
    hnp.arrays(np.float64, d, elements=st.floats(0, 64)))), radii)
def test_weighted_trunc_bound(xw, B):
    x, w = xw
    out = trunc_weighted_l1(x, B, w)
    assert np.sum(np.abs(out * w)) <= B * (1 + 1e-12)
    np.testing.assert_array_equal(trunc_weighted_l1(out, B, w), out)


def test_trunc_rows_matches_single(rng):
    X = rng.standard_normal((50, 4)) * 5
    w = np.array([1.0, 2.0, 4.0, 8.0])
    np.testing.assert_array_equal(trunc_rows(X, 3.0), np.vstack([trunc_lp(r, 3.0) for r in X]))
    np.testing.assert_array_equal(trunc_rows(X, 3.0, p=1), np.vstack([trunc_lp(r, 3.0, 1) for r in X]))
    np.testing.assert_array_equal(trunc_rows(X, 3.0, weights=w),
                                  np.vstack([trunc_weighted_l1(r, 3.0, w) for r in X]))


def test_clip_scalar():
    assert clip_scalar(0.9, 0.125, 0.875) == 0.875
    assert clip_scalar(0.5, 0.125, 0.875) == 0.5
    assert clip_scalar(-1, 0.125, 0.875) == 0.125
    with pytest.raises(InvalidInputError):
        clip_scalar(0.5, 1.0, 0.0)


def test_mahalanobis_examples(rng):
    assert mahalanobis_norm(np.eye(2), np.eye(2)) == pytest.approx(np.sqrt(2), rel=1e-15)
    assert mahalanobis_norm(1.0, 4.0) == pytest.approx(0.25, rel=1e-15)
    A = random_psd(rng, 3)
    S = random_psd(rng, 3)
    vals, vecs = np.linalg.eig(S)  # independent (non-symmetric) routine
    S_inv_half = (vecs * vals.real ** -0.5) @ np.linalg.inv(vecs)
    expected = np.linalg.norm(S_inv_half @ A @ S_inv_half, "fro")
    assert mahalanobis_norm(A, S) == pytest.approx(expected, rel=1e-9)
    with pytest.raises(SingularMatrixError):
        mahalanobis_norm(np.eye(2), np.diag([1.0, 0.0]))


@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_mahalanobis_identity_is_frobenius(d, seed):
    A = random_psd(np.random.default_rng(seed), d)
    assert mahalanobis_norm(A, np.eye(d)) == np.linalg.norm(symmetrize(A), "fro")


def test_inv_sqrt_examples():
    np.testing.assert_array_equal(inv_sqrt_psd(4 * np.eye(3)), 0.5 * np.eye(3))
    np.testing.assert_allclose(inv_sqrt_psd(np.diag([1.0, 9.0])), np.diag([1.0, 1 / 3]), rtol=1e-15)
    with pytest.raises(SingularMatrixError):
        inv_sqrt_psd(np.diag([1.0, 1e-12]))


def test_inv_sqrt_round_trip_1000(rng):
    for _ in range(1000):
        d = int(rng.integers(1, 17))
        S = random_psd(rng, d, cond=100.0)
        R = inv_sqrt_psd(S)
        np.testing.assert_allclose(R, R.T, atol=0)
        assert np.linalg.norm(R @ R @ S - np.eye(d), "fro") <= 1e-8 * d


def test_min_eigenvalue_examples(rng):
    assert min_eigenvalue(np.diag([2.0, 5.0])) == pytest.approx(2.0, rel=1e-12)
    assert min_eigenvalue([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx(1.0, rel=1e-12)
    # closed-form cubic roots (trigonometric method) as the d = 3 oracle
    M = random_psd(rng, 3) - 2 * np.eye(3)
    p1 = M[0, 1] ** 2 + M[0, 2] ** 2 + M[1, 2] ** 2
    q = np.trace(M) / 3
    p2 = (M[0, 0] - q) ** 2 + (M[1, 1] - q) ** 2 + (M[2, 2] - q) ** 2 + 2 * p1
    p = np.sqrt(p2 / 6)
    r = np.clip(np.linalg.det((M - q * np.eye(3)) / p) / 2, -1, 1)
    phi = np.arccos(r) / 3
    smallest = q + 2 * p * np.cos(phi + 2 * np.pi / 3)
    assert min_eigenvalue(M) == pytest.approx(smallest, rel=1e-8, abs=1e-12)


def test_min_eigenvalue_rejects_asymmetric():
    with pytest.raises(InvalidInputError):
        min_eigenvalue([[1.0, 0.5], [0.0, 1.0]])
    # within tolerance is accepted
    min_eigenvalue([[1.0, 0.5], [0.5 + 1e-12, 1.0]])


@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_min_eigenvalue_below_rayleigh(d, seed):
    g = np.random.default_rng(seed)
    A = g.standard_normal((d, d))
    M = A + A.T
    lam = min_eigenvalue(M)
    for x in g.standard_normal((100, d)):
        assert lam <= x @ M @ x / (x @ x) + 1e-9 * max(1.0, np.abs(M).max())


def test_psd_sqrt_factor_singular():
    A = psd_sqrt_factor(np.diag([4.0, 0.0]))
    np.testing.assert_allclose(A @ A.T, np.diag([4.0, 0.0]), atol=1e-15)
    with pytest.raises(InvalidInputError):
        psd_sqrt_factor(np.diag([1.0, -1.0]))
