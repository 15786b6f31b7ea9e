"""Acceptance criteria 1-11, one PASS/FAIL line each; 12 is reported as not reproducible.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""

import dataclasses
import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, stats

from conftest import ACCEPTANCE_LINES
from privsample import ConstantsProfile, PrivacyBudget
from privsample.experiment import AuditConfig, build_audit_target
from privsample.gaussian import (
    BoundedCovParams,
    KnownCovParams,
    bounded_cov_sampler,
    derive_bounded_cov_params,
    pair_differences,
    spherical_gaussian_sampler,
)
from privsample.noise import make_rng
from privsample.numerics import min_eigenvalue, trunc_rows
from privsample.privacy.accounting import CompositionQuery, advanced_composition, subsampling_amplification
from privsample.privacy.audit import empirical_epsilon_audit
from privsample.privacy.hockey_stick import hockey_stick_estimate
from privsample.product import (
    BernoulliSupplier,
    BucketAssignment,
    derive_preconditioner_params,
    end_to_end_product_distribution,
    preconditioner,
    product_params_from_B,
    product_sampler_probs,
    weighted_truncated_mean,
)
from privsample.reductions import OracleLearner, bounded_cov_inner, unbounded_cov_sampler
from privsample.stats import energy_block_test

PRACTICAL = ConstantsProfile()
LEVEL = 0.01
REPS = 20
RUNS = 10_000
BLOCK = 500
NOT_REPRODUCIBLE = (
    "criterion 12 NOT REPRODUCIBLE: the asymptotic sample-complexity separations and the lower "
    "bounds need sample sizes far beyond desk scale; criteria 1-11 stand in for them"
)


def _two_sample_protocol(draw_outputs, draw_reference, seed):
    """Fraction of REPS energy tests (RUNS vs RUNS) that do not reject at LEVEL."""
    g = make_rng(seed)
    keep = [not energy_block_test(draw_outputs(g), draw_reference(g), block_size=BLOCK).rejects(LEVEL)
            for _ in range(REPS)]
    return float(np.mean(keep))


# --- criteria -------------------------------------------------------------------


def criterion_1():
    d, n = 4, 50
    mu = np.array([1.0, -2.0, 0.5, 3.0])
    params = KnownCovParams(B=1e9, sigma=KnownCovParams.exact_sigma(n), n=n)

    def outputs(g):
        return np.array([spherical_gaussian_sampler(g.standard_normal((n, d)) + mu, params, g)
                         for _ in range(RUNS)])

    frac = _two_sample_protocol(outputs, lambda g: g.standard_normal((RUNS, d)) + mu, seed=102)
    return frac >= 0.95, f"non-reject rate {frac:.2f} over {REPS} reps (need >= 0.95)"


def criterion_2():
    d = 4
    budget = PrivacyBudget(1.0, 1e-6)
    derived = derive_bounded_cov_params(d, 0.0, 4.0, budget, 0.1, PRACTICAL, n2=200)
    # B = 1e3 never binds for these rows and keeps the STLap shift exactly representable
    params = dataclasses.replace(derived, B=1e3)
    scale = np.sqrt([1.0, 2.0, 3.0, 4.0])
    mu = np.array([2.0, 0.0, -1.0, 5.0])
    bottoms = [0]

    def outputs(g):
        out = []
        while len(out) < RUNS:
            res = bounded_cov_sampler(g.standard_normal((params.rows, d)) * scale + mu, params, budget, g)
            if res.is_bottom:
                bottoms[0] += 1
            else:
                out.append(res.value)
        return np.array(out)

    frac = _two_sample_protocol(outputs, lambda g: g.standard_normal((RUNS, d)) * scale + mu, seed=202)
    return frac >= 0.95, f"non-reject rate {frac:.2f} over {REPS} reps (need >= 0.95), {bottoms[0]} bottoms"


def _ptr_dataset(kind, g, rows, d, B):
    if kind == "benign":
        return g.standard_normal((rows, d)) * g.uniform(0.8, 1.5)
    if kind == "shrunk":
        # covariance scaled so lambda_min sits around the threshold
        return g.standard_normal((rows, d)) * g.uniform(0.5, 1.1)
    if kind == "degenerate":
        X = np.zeros((rows, d))
        k = g.integers(0, rows)
        X[g.choice(rows, size=k, replace=False)] = g.standard_normal((k, d)) * 3 * B
        return X
    if kind == "low_rank":
        X = g.standard_normal((rows, d)) * 2
        X[:, 0] *= g.uniform(0.0, 1.2)
        return X
    # boundary: every row pushed to the truncation sphere
    X = g.standard_normal((rows, d))
    return B * X / np.linalg.norm(X, axis=1, keepdims=True) * g.choice([1.0, 10.0])


def criterion_3():
    d, n2, B = 2, 100, 3.0
    budget = PrivacyBudget(2.0, 0.5)
    params = BoundedCovParams(d=d, B=B, n1=n2, n2=n2)  # unshifted 0.75 n2 threshold
    assert params.threshold == 0.75 * n2 and not params.shift_compensation
    g = make_rng(303)
    kinds = ("benign", "shrunk", "degenerate", "low_rank", "boundary")
    violations = released = 0
    runs = 100_000
    for t in range(runs):
        X = _ptr_dataset(kinds[t % len(kinds)], g, params.rows, d, B)
        res = bounded_cov_sampler(X, params, budget, g)
        if not res.is_bottom:
            released += 1
            lam = min_eigenvalue(
                (lambda U: U.T @ U)(pair_differences(trunc_rows(X, B), params.n1, params.n2)))
            violations += lam < params.threshold
    ok = violations == 0 and released > 0
    return ok, f"{runs} runs, {released} released, {violations} violations of lambda_min >= 0.75 n2"


def _exact_clipped(rows, w, B):
    q = [Fraction(0)] * len(w)
    for row in rows:
        norm = sum(x * wj for x, wj in zip(row, w))
        scale = Fraction(1) if norm <= B else B / norm
        q = [qj + x * scale for qj, x in zip(q, row)]
    q = [qj / len(rows) for qj in q]
    return tuple(min(max(qj, Fraction(1, 8 * wj)), Fraction(7, 8 * wj)) for qj, wj in zip(q, w))


def _output_prob(p, y):
    out = Fraction(1)
    for pj, yj in zip(p, y):
        out *= pj if yj else 1 - pj
    return out


def criterion_4():
    d, n, eps = 2, 4, 1.0
    B = Fraction(1, 4)
    params = product_params_from_B(float(B), eps)
    assert params.n == n
    e_lower = Fraction(2718281828459045, 10 ** 15)  # just below e
    row_values = list(itertools.product((0, 1), repeat=d))
    outputs = list(itertools.product((0, 1), repeat=d))
    # every ordered neighbour pair, reduced to sorted-row keys (the mechanism is order-free)
    key_pairs = set()
    for X in itertools.product(row_values, repeat=n):
        kx = tuple(sorted(X))
        for i, r in itertools.product(range(n), row_values):
            if r != X[i]:
                Y = X[:i] + (r,) + X[i + 1:]
                key_pairs.add((kx, tuple(sorted(Y))))
    worst = Fraction(0)
    mismatch = 0.0
    for ell in itertools.product(range(4), repeat=d):
        w = [2 ** l for l in ell]
        buckets = BucketAssignment(np.array(ell), 3)
        cache = {}
        for kx, ky in key_pairs:
            for key in (kx, ky):
                if key not in cache:
                    cache[key] = _exact_clipped(key, w, B)
                    lib = product_sampler_probs(np.array(key), buckets, params).p_tilde
                    mismatch = max(mismatch, float(np.max(np.abs(lib - np.array(cache[key], float)))))
            for y in outputs:
                ratio = _output_prob(cache[ky], y) / _output_prob(cache[kx], y)
                worst = max(worst, ratio)
    ok = worst <= e_lower and mismatch <= 1e-12
    return ok, (f"{len(key_pairs)} neighbour classes x 16 bucket settings x 4 outputs; "
                f"max ratio {float(worst):.6f} <= e; library vs exact {mismatch:.1e}")


def criterion_5():
    g = make_rng(505)
    violations = 0
    for _ in range(10_000):
        d = int(g.integers(1, 17))
        n = int(g.integers(1, 200))
        B = float(g.uniform(0.1, 4 * d))
        p = g.random(d)
        X = (g.random((n, d)) < p).astype(np.int8)
        Y = X.copy()
        Y[g.integers(n)] = g.integers(0, 2, d)
        w = np.ldexp(1.0, g.integers(0, 10, d))
        diff = np.sum(w * np.abs(weighted_truncated_mean(X, B, w) - weighted_truncated_mean(Y, B, w)))
        violations += diff > 2 * B / n * (1 + 1e-12)
    return violations == 0, f"10000 neighbour pairs, {violations} violations of 2B/n"


def _hs_oracle(eps):
    f = lambda y: max(stats.norm.pdf(y) - math.exp(eps) * stats.norm.pdf(y, loc=1.0), 0.0)
    return integrate.quad(f, -40, 40, points=[0.5 - eps], limit=400, epsabs=1e-14)[0]


def criterion_6():
    g = make_rng(606)
    parts, ok = [], True
    for eps in (0.0, 0.5, 1.0):
        est = hockey_stick_estimate(lambda y: stats.norm.logpdf(y), lambda y: stats.norm.logpdf(y, loc=1.0),
                                    eps, lambda r, size: r.standard_normal(size), 1_000_000, g)
        z = abs(est.estimate - _hs_oracle(eps)) / est.std_error
        ok &= z <= 3
        parts.append(f"eps={eps}: {z:.2f} SE")
    return ok, ", ".join(parts)


def criterion_7():
    g = make_rng(707)
    worst = 0.0
    for _ in range(1000):
        eps0 = float(g.uniform(1e-3, 2))
        k = int(g.integers(1, 1000))
        delta0 = float(g.uniform(0, min(1e-3, 0.4 / k)))  # keeps k delta0 + delta1 < 1
        delta1 = float(10 ** g.uniform(-12, math.log10(0.5)))
        b = advanced_composition(CompositionQuery(eps0, delta0, k, delta1))
        ref_eps = (math.sqrt(2 * k * math.log(1 / delta1)) + k * (math.exp(eps0) - 1)) * eps0
        worst = max(worst, abs(b.eps - ref_eps) / ref_eps,
                    abs(b.delta - (k * delta0 + delta1)) / (k * delta0 + delta1))
        eps = float(g.uniform(1e-3, 5))
        delta = float(g.uniform(0, 0.5))
        N = int(g.integers(1, 10_000))
        n = int(g.integers(1, N + 1))
        s = subsampling_amplification(eps, delta, n, N)
        ref_eps = math.log(1 + n / N * (math.exp(eps) - 1))
        worst = max(worst, abs(s.eps - ref_eps) / ref_eps)
        if delta > 0:
            worst = max(worst, abs(s.delta - n / N * delta) / (n / N * delta))
    return worst <= 1e-12, f"max relative error {worst:.2e} over 1000 + 1000 inputs"


def criterion_8():
    p = np.array([0.5, 0.1, 0.01, 0.6] * 2)
    params = derive_preconditioner_params(8, 1.0, 0.1, 0.05, PRACTICAL)
    g = make_rng(808)
    hits = np.zeros(8)
    trials = 200
    for _ in range(trials):
        b = preconditioner(BernoulliSupplier(p, g), params, g)
        for j in range(8):
            lo, hi = b.interval(j)
            hits[j] += lo <= p[j] <= hi
    rates = hits / trials
    return bool(np.all(rates >= 0.9)), f"per-coordinate rates {np.round(rates, 3).tolist()} (need >= 0.9), L={params.L}"


def criterion_9():
    d, alpha = 4, 0.1
    g = make_rng(909)
    p = g.uniform(0, 1, d)
    outcomes = np.array(list(itertools.product((0, 1), repeat=d)))
    truth = np.prod(np.where(outcomes == 1, p, 1 - p), axis=1)
    runs, per_run = 500, 200
    counts = np.zeros(len(outcomes))
    mixture = np.zeros(len(outcomes))
    for _ in range(runs):
        res = end_to_end_product_distribution(BernoulliSupplier(p, g), d, PrivacyBudget(1.0), alpha, g)
        draws = res.draw(g, size=per_run)
        counts += np.bincount(draws @ (1 << np.arange(d - 1, -1, -1)), minlength=len(outcomes))
        mixture += np.prod(np.where(outcomes == 1, res.probs, 1 - res.probs), axis=1) / runs
    N = runs * per_run
    emp = counts / N
    tv = 0.5 * np.abs(emp - truth).sum()
    se = 0.5 * np.sum(np.sqrt(truth * (1 - truth) / N))
    exact_tv = 0.5 * np.abs(mixture - truth).sum()
    return tv <= alpha + 3 * se, (f"empirical TV {tv:.4f} <= {alpha} + 3*{se:.4f} over {N} draws "
                                  f"({runs} independent runs); exact mixture TV {exact_tv:.4f}")


def criterion_10():
    g = make_rng(1010)
    lines, ok = [], True
    for cfg in (AuditConfig("known_cov"), AuditConfig("product_sampler", budget=PrivacyBudget(1.0)),
                AuditConfig("leaky_mock")):
        mech, pair, declared, flags = build_audit_target(cfg, g)
        rep = empirical_epsilon_audit(mech, pair, 10_000, g, delta_assumed=declared.delta,
                                      eps_declared=declared.eps, label=cfg.mechanism)
        if cfg.mechanism == "leaky_mock":
            ok &= rep.eps_lower_bound > 2
        else:
            ok &= rep.eps_lower_bound <= declared.eps
        lines.append(f"{cfg.mechanism} lb={rep.eps_lower_bound:.3f}")
    return ok, ", ".join(lines) + " (need <= 1, <= 1, > 2)"


def criterion_11():
    d = 3
    mu = np.array([4.0, -3.0, 1.0])
    A = np.array([[2.0, 0.0, 0.0], [0.6, 1.0, 0.0], [-0.3, 0.4, 0.5]])
    sigma = A @ A.T
    budget = PrivacyBudget(1.0, 1e-6)
    learner = OracleLearner(mu, sigma)
    # whitened rows are N(0, 4I); the derived radius (about 50) never binds
    inner = bounded_cov_inner(0.1, PRACTICAL, n2=200)
    rows = derive_bounded_cov_params(d, 1.0, 4.0, budget.split(2), 0.1, PRACTICAL, n2=200).rows
    bottoms = [0]

    def outputs(g):
        out = []
        while len(out) < RUNS:
            X = g.standard_normal((rows, d)) @ A.T + mu
            res = unbounded_cov_sampler(X, budget, 0.1, learner, inner, g)
            if res.is_bottom:
                bottoms[0] += 1
            else:
                out.append(res.value)
        return np.array(out)

    frac = _two_sample_protocol(outputs, lambda g: g.standard_normal((RUNS, d)) @ A.T + mu, seed=1111)
    return frac >= 0.95, f"non-reject rate {frac:.2f} over {REPS} reps (need >= 0.95), {bottoms[0]} bottoms"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


def _evaluate(i):
    start = time.perf_counter()
    ok, detail = CRITERIA[i]()
    line = f"criterion {i} {'PASS' if ok else 'FAIL'}: {detail} [{time.perf_counter() - start:.1f}s]"
    return ok, line


@pytest.mark.acceptance
@pytest.mark.parametrize("i", sorted(CRITERIA))
def test_criterion(i):
    ok, line = _evaluate(i)
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_12_not_reproducible():
    print(NOT_REPRODUCIBLE)
    ACCEPTANCE_LINES.append(NOT_REPRODUCIBLE)


if __name__ == "__main__":
    import sys

    chosen = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    for i in chosen:
        print(_evaluate(i)[1], flush=True)
    print(NOT_REPRODUCIBLE)
