import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privsample import ConstantsProfile, PrivacyBudget
from privsample.errors import InvalidInputError
from privsample.gaussian import bounded_cov_sampler, derive_bounded_cov_params
from privsample.noise import make_rng
from privsample.numerics import mahalanobis_norm
from privsample.privacy.accounting import CompositionQuery, advanced_composition, subsampling_amplification
from privsample.privacy.covariance_estimator import (
    EstimatorConfig,
    agnostic_centered_gaussian_learner,
    clamp_covariance,
    covariance_estimator_pipeline,
    estimator_privacy_cost,
)

BUDGET = PrivacyBudget(1.0, 1e-6)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        EstimatorConfig(N=10, n=11, L=1)
    with pytest.raises(InvalidInputError):
        EstimatorConfig(N=10, n=5, L=0)
    with pytest.raises(InvalidInputError):
        EstimatorConfig(N=10, n=5, L=1, xi=0.02)


def test_clamp_examples():
    out, clamped = clamp_covariance(3 * np.eye(2))
    np.testing.assert_array_equal(out, np.eye(2))
    assert clamped
    out, clamped = clamp_covariance(1.7 * np.eye(2))
    np.testing.assert_array_equal(out, 1.7 * np.eye(2))
    assert not clamped


@given(st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_clamp_output_range(d, seed):
    g = make_rng(seed)
    A = g.standard_normal((d, d)) * 1.5
    out, clamped = clamp_covariance(A @ A.T)
    vals = np.linalg.eigvalsh(out)
    assert (clamped and np.array_equal(out, np.eye(d))) or (vals[0] >= 0.5 and vals[-1] <= 2.5)


def test_learner_rank_one_average():
    est = agnostic_centered_gaussian_learner(np.tile([0.0, 1.0, 0.0], (4, 1)))
    np.testing.assert_array_equal(est, np.diag([0.0, 1.0, 0.0]))
    with pytest.raises(InvalidInputError):
        agnostic_centered_gaussian_learner(np.zeros((2, 3)))


def test_learner_concentration():
    est = agnostic_centered_gaussian_learner(make_rng(0).standard_normal((100_000, 4)))
    assert np.linalg.norm(est - np.eye(4), "fro") <= 0.05


def test_privacy_cost_chain():
    cfg = EstimatorConfig(N=10_000, n=600, L=200)
    cost = estimator_privacy_cost(BUDGET, cfg, 1e-6)
    step = subsampling_amplification(1.0, 1e-6, 600, 10_000)
    ref = advanced_composition(CompositionQuery(step.eps, step.delta, 200, 1e-6))
    assert cost == ref


def test_pipeline_row_checks():
    cfg = EstimatorConfig(N=10, n=5, L=3)
    with pytest.raises(InvalidInputError):
        covariance_estimator_pipeline(cfg, lambda x, r: x[0], agnostic_centered_gaussian_learner,
                                      np.zeros((9, 2)), make_rng(0))
    with pytest.raises(InvalidInputError):
        covariance_estimator_pipeline(cfg, lambda x, r: None, agnostic_centered_gaussian_learner,
                                      np.zeros((10, 2)), make_rng(0))


def _bounded_cov_round(d):
    profile = ConstantsProfile()
    params = derive_bounded_cov_params(d, 0.0, 2.0, BUDGET, 0.1, profile, n2=200)

    def sampler(rows, rng):
        out = bounded_cov_sampler(rows, params, BUDGET, rng)
        return out.value

    return params, sampler


def test_pipeline_recovers_covariance():
    # at L = 200 a single run meets 0.3 about four times in five; check the typical run
    d = 3
    sigma = 1.5 * np.eye(d)
    params, sampler = _bounded_cov_round(d)
    cfg = EstimatorConfig(N=20 * params.rows, n=params.rows, L=200)
    g = make_rng(12)
    errors = []
    for _ in range(40):
        data = g.multivariate_normal(np.zeros(d), sigma, size=cfg.N)
        res = covariance_estimator_pipeline(cfg, sampler, agnostic_centered_gaussian_learner, data, g,
                                            sampler_budget=BUDGET)
        assert res.non_private_components == ("empirical-second-moment",)
        assert res.privacy is not None
        errors.append(mahalanobis_norm(res.estimate - sigma, sigma))
    errors = np.array(errors)
    assert np.median(errors) <= 0.3
    assert np.mean(errors <= 0.3) >= 0.6


def test_pipeline_counts_bottoms():
    cfg = EstimatorConfig(N=100, n=10, L=20)
    calls = iter(range(1000))
    sampler = lambda rows, rng: None if next(calls) % 2 else rng.standard_normal(2)
    res = covariance_estimator_pipeline(cfg, sampler, agnostic_centered_gaussian_learner,
                                        np.zeros((100, 2)), make_rng(0), learner_is_stand_in=False)
    assert res.bottoms == 10
    assert res.non_private_components == ()
    assert res.privacy is None
