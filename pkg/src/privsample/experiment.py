"""Experiment runner behind the CLI: derive parameters, sample, report."""

from __future__ import annotations

import dataclasses
import json
import math
import time
from pathlib import Path

import numpy as np

from privsample import gaussian, product, reductions
from privsample.budget import PrivacyBudget
from privsample.errors import InvalidInputError
from privsample.io import BIT_CSV, REAL_CSV, ingest_dataset, parse_generator
from privsample.noise import make_rng
from privsample.privacy.audit import empirical_epsilon_audit
from privsample.profile import ConstantsProfile
from privsample.stats import energy_block_test

KNOWN_COV = "gaussian_known_cov"
BOUNDED_COV = "gaussian_bounded_cov"
SIMPLE_BOUNDED_COV = "gaussian_simple_bounded_cov"
UNBOUNDED_COV = "gaussian_unbounded_cov"
PRODUCT = "product"
TASKS = (KNOWN_COV, BOUNDED_COV, SIMPLE_BOUNDED_COV, UNBOUNDED_COV, PRODUCT)

EXIT_OK, EXIT_ERROR, EXIT_BOTTOM = 0, 1, 2

FORMULAS = {
    KNOWN_COV: {
        "B": "R + m_B * C * sqrt(d + ln(2 ln(2/delta) / (alpha eps)))",
        "n": "1 + ceil(m_n * B * sqrt(ln(2/delta)) / eps)",
        "sigma": "sqrt((n - 1) / n)",
    },
    BOUNDED_COV: {
        "B": "R + m_B * kappa * sqrt(d + ln(2 ln(2/delta) / (alpha eps)))",
        "Delta": "2 B^2",
        "n1": "n2",
        "n2": "max(2d, ceil(m_n * C^2 * B^2 * ln(10/delta) / (c eps))) unless given",
        "threshold": "0.75 n2 (paper_faithful) or recalibrated concentration bound (practical)",
    },
    SIMPLE_BOUNDED_COV: {
        "B": "R + m_B * kappa * sqrt(d (ln(2d/(alpha eps)) + ln ln(2/delta)))",
        "sigma": "sqrt(alpha) / (2 d^(1/4))",
        "n1": "ceil(m_n * B^2 * ln(2/delta) / (sigma eps)^2)",
        "n2": "n1",
    },
    PRODUCT: {
        "B": "m * (d/alpha') ln(d/alpha'), alpha' = alpha/2 (pipeline) or alpha (sampler stage)",
        "n": "ceil(16 B / eps_stage)",
        "L": "ceil(log2(2d / alpha'))",
        "B_l": "m * (d 2^-l + 1)",
        "n_l": "ceil((m / eps_stage) B_l 2^l ln(d / (alpha' beta)))",
    },
}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.

    Exactly one of `data_path` and `generator` must be set. `n2` fixes the
    bounded-covariance pair count (practical profiles only). `product_stage`
    selects the full flip/precondition/sample pipeline or the sampler stage
    alone, the latter with bucket indices `buckets` (default all zero).
    """

    task: str
    budget: PrivacyBudget
    alpha: float
    profile: ConstantsProfile
    seed: int = 0
    data_path: str | None = None
    generator: str | None = None
    output_path: str | None = None
    kappa: float = 1.0
    R: float = 0.0
    n2: int | None = None
    learner_rows: int = 2000
    product_stage: str = "pipeline"
    buckets: tuple | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise InvalidInputError(f"unknown task {self.task!r}; choose from {TASKS}")
        if (self.data_path is None) == (self.generator is None):
            raise InvalidInputError("give exactly one of a dataset path and a generator spec")
        if not 0 < self.alpha <= 0.5:
            raise InvalidInputError(f"alpha must lie in (0, 1/2], got {self.alpha}")
        if self.product_stage not in ("pipeline", "sampler"):
            raise InvalidInputError(f"unknown product stage {self.product_stage!r}")

    def as_dict(self) -> dict:
        return {
            "task": self.task, "budget": self.budget.as_dict(), "alpha": self.alpha,
            "profile": self.profile.as_dict(), "seed": self.seed, "data_path": self.data_path,
            "generator": self.generator, "kappa": self.kappa, "R": self.R, "n2": self.n2,
            "learner_rows": self.learner_rows, "product_stage": self.product_stage,
            "buckets": None if self.buckets is None else list(self.buckets),
        }


@dataclasses.dataclass
class RunReport:
    config: dict
    derived: dict
    formulas: dict
    outcome: list | None
    outcome_kind: str
    checks: dict
    non_private: list
    diagnostics: dict
    wall_time_s: float = 0.0

    @property
    def exit_code(self) -> int:
        return EXIT_BOTTOM if self.outcome_kind == "bottom" else EXIT_OK

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.as_dict()), sort_keys=True, indent=2, ensure_ascii=False)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _dimension(config: ExperimentConfig) -> int:
    if config.generator is not None:
        return parse_generator(config.generator).d
    schema = BIT_CSV if config.task == PRODUCT else REAL_CSV
    return ingest_dataset(config.data_path, schema).shape[1]


class _Rows:
    """Row source: a generator draws exactly what is asked, a file must have enough."""

    def __init__(self, config: ExperimentConfig, rng):
        self._rng = rng
        if config.generator is not None:
            self.spec = parse_generator(config.generator)
            self.data = None
        else:
            schema = BIT_CSV if config.task == PRODUCT else REAL_CSV
            self.spec = None
            self.data = ingest_dataset(config.data_path, schema)
        self._pos = 0

    @property
    def d(self) -> int:
        return self.spec.d if self.spec is not None else self.data.shape[1]

    def take(self, n: int) -> np.ndarray:
        if self.spec is not None:
            return self.spec.sample(n, self._rng)
        if self._pos + n > self.data.shape[0]:
            raise InvalidInputError(
                f"dataset has {self.data.shape[0]} rows; the run needs at least {self._pos + n}")
        block = self.data[self._pos:self._pos + n]
        self._pos += n
        return block


def derive_parameters(config: ExperimentConfig, d: int | None = None) -> dict:
    """Derived parameters for `config` without running anything."""
    d = _dimension(config) if d is None else d
    b, a, prof = config.budget, config.alpha, config.profile
    if config.task == KNOWN_COV:
        return gaussian.derive_known_cov_params(d, config.R, b, a, prof).as_dict()
    if config.task == BOUNDED_COV:
        return gaussian.derive_bounded_cov_params(d, config.R, config.kappa, b, a, prof, n2=config.n2).as_dict()
    if config.task == SIMPLE_BOUNDED_COV:
        return gaussian.derive_simple_bounded_cov_params(d, config.R, config.kappa, b, a, prof).as_dict()
    if config.task == UNBOUNDED_COV:
        half = b.split(2)
        inner = gaussian.derive_bounded_cov_params(d, 1.0, reductions.UNBOUNDED_KAPPA, half, a, prof,
                                                   n2=config.n2)
        return {"learner_rows": max(config.learner_rows, d + 1), "learner_accuracy": reductions.LEARNER_ACCURACY,
                "inner": inner.as_dict()}
    if config.product_stage == "sampler":
        return product.derive_product_sampler_params(d, b.eps, a, prof).as_dict()
    stage = b.eps / 3
    return {
        "stage_eps": stage,
        "sampler": product.derive_product_sampler_params(d, stage, a / 2, prof).as_dict(),
        "preconditioner": product.derive_preconditioner_params(d, stage, a / 2, a / (24 * d), prof).as_dict(),
    }


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Derive, sample and (if `output_path` is set) write the JSON report.

    Raises on invalid input; the caller maps exceptions to exit status 1.
    """
    start = time.perf_counter()
    rng = make_rng(config.seed)
    rows = _Rows(config, rng)
    d = rows.d
    derived = derive_parameters(config, d)
    checks, non_private, diagnostics = {}, [], {}
    outcome, kind = None, "vector"
    b, a, prof = config.budget, config.alpha, config.profile

    if config.task == KNOWN_COV:
        params = gaussian.derive_known_cov_params(d, config.R, b, a, prof)
        checks["noise_multiplier"] = gaussian.noise_multiplier_check(params, b)
        outcome = gaussian.spherical_gaussian_sampler(rows.take(params.n), params, rng)
    elif config.task == SIMPLE_BOUNDED_COV:
        params = gaussian.derive_simple_bounded_cov_params(d, config.R, config.kappa, b, a, prof)
        checks["noise_multiplier"] = gaussian.noise_multiplier_check(params, b)
        outcome = gaussian.simple_bounded_cov_sampler(rows.take(params.rows), params.B, params.sigma,
                                                      params.n1, params.n2, rng)
    elif config.task == BOUNDED_COV:
        params = gaussian.derive_bounded_cov_params(d, config.R, config.kappa, b, a, prof, n2=config.n2)
        checks["analytic_ptr_conditions"] = gaussian.noise_multiplier_check(params, b, prof)
        result = gaussian.bounded_cov_sampler(rows.take(params.rows), params, b, rng)
        diagnostics.update(result.diagnostics)
        if result.is_bottom:
            kind = "bottom"
        else:
            outcome = result.value
            checks["release_implies_threshold"] = result.diagnostics["lambda_min"] >= (
                params.threshold - (result.diagnostics["shift"] if params.shift_compensation else 0))
    elif config.task == UNBOUNDED_COV:
        learner = reductions.EmpiricalLearner(rows=config.learner_rows)
        inner_params = derived["inner"]
        need = learner.sample_complexity(d, b.split(2), reductions.LEARNER_ACCURACY, a / 2) + (
            inner_params["n1"] + 2 * inner_params["n2"])
        result = reductions.unbounded_cov_sampler(
            rows.take(need), b, a, learner, reductions.bounded_cov_inner(a, prof, n2=config.n2), rng)
        diagnostics.update(result.diagnostics)
        non_private.append(learner.name)
        if result.is_bottom:
            kind = "bottom"
        else:
            outcome = result.value
    else:
        kind = "bits"
        if config.product_stage == "sampler":
            params = product.derive_product_sampler_params(d, b.eps, a, prof)
            ell = np.zeros(d, dtype=int) if config.buckets is None else np.asarray(config.buckets)
            L = max(math.ceil(math.log2(2 * d / a)), int(ell.max(initial=0)))
            buckets = product.BucketAssignment(ell, L)
            clipped = product.product_sampler_probs(rows.take(params.n), buckets, params)
            checks["clip_containment"] = bool(np.all(
                (clipped.p_tilde >= 1 / (8 * clipped.w)) & (clipped.p_tilde <= 7 / (8 * clipped.w))))
            checks["ratio_bound_within_eps"] = params.ratio_bound <= b.eps
            diagnostics["p_tilde"] = clipped.p_tilde
            outcome = (rng.random(d) < clipped.p_tilde).astype(int)
        else:
            res = product.end_to_end_product_distribution(lambda n: rows.take(n), d, b, a, rng, prof)
            checks["ratio_bound_within_stage_eps"] = res.sampler.ratio_bound <= res.stage_budgets[2].eps
            diagnostics.update({"marginals": res.probs, "flipped": res.mask.flipped,
                                "buckets": res.buckets.ell, "rows_used": res.rows_used})
            outcome = res.draw(rng)

    report = RunReport(
        config=config.as_dict(),
        derived=derived,
        formulas=FORMULAS.get(config.task, {}),
        outcome=None if outcome is None else np.asarray(outcome).tolist(),
        outcome_kind=kind,
        checks=checks,
        non_private=non_private,
        diagnostics=diagnostics,
        wall_time_s=time.perf_counter() - start,
    )
    if config.output_path:
        Path(config.output_path).parent.mkdir(parents=True, exist_ok=True)
        Path(config.output_path).write_text(report.to_json() + "\n", encoding="utf-8")
    return report


# --- audit suite --------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class AuditConfig:
    """One audit target.

    `mechanism` is ``known_cov`` (Algorithm-1 sampler at derived parameters),
    ``product_sampler`` (the clipped-Bernoulli stage, buckets all zero) or
    ``leaky_mock`` (releases the first row verbatim; declared at `budget`).
    """

    mechanism: str
    d: int = 2
    budget: PrivacyBudget = PrivacyBudget(1.0, 1e-5)
    alpha: float = 0.1
    profile: ConstantsProfile = dataclasses.field(default_factory=ConstantsProfile.practical)
    check_distribution: bool = False


def _leaky(data, rng):
    return np.asarray(data, dtype=float)[0]


def build_audit_target(cfg: AuditConfig, rng):
    """(mechanism, neighbour pair, declared budget, non-private names)."""
    if cfg.mechanism == "known_cov":
        params = gaussian.derive_known_cov_params(cfg.d, 0.0, cfg.budget, cfg.alpha, cfg.profile)
        X = rng.standard_normal((params.n, cfg.d))
        Xa, Xb = X.copy(), X.copy()
        # opposite extreme rows maximise the shift of the truncated mean
        Xa[0] = -params.B * np.eye(cfg.d)[0]
        Xb[0] = params.B * np.eye(cfg.d)[0]
        mech = lambda data, r: gaussian.spherical_gaussian_sampler(data, params, r)  # noqa: E731
        return mech, (Xa, Xb), cfg.budget, []
    if cfg.mechanism == "product_sampler":
        if cfg.budget.delta != 0:
            raise InvalidInputError("the product sampler audit needs delta = 0")
        params = product.derive_product_sampler_params(cfg.d, cfg.budget.eps, cfg.alpha, cfg.profile)
        buckets = product.BucketAssignment(np.zeros(cfg.d, dtype=int), 1)
        X = (rng.random((params.n, cfg.d)) < 0.5).astype(np.int8)
        Xa, Xb = X.copy(), X.copy()
        Xa[0], Xb[0] = 0, 1
        mech = lambda data, r: product.product_sampler(data, buckets, params, r)  # noqa: E731
        return mech, (Xa, Xb), cfg.budget, []
    if cfg.mechanism == "leaky_mock":
        X = rng.standard_normal((8, cfg.d))
        Xa, Xb = X.copy(), X.copy()
        Xb[0] = X[0] + 1.0
        return _leaky, (Xa, Xb), cfg.budget, ["leaky_mock"]
    raise InvalidInputError(f"unknown audit mechanism {cfg.mechanism!r}")


def run_audit_suite(configs, trials: int, seed: int = 0) -> tuple[dict, int]:
    """Audit every config; exit code 1 if any lower bound exceeds its declared eps."""
    rng = make_rng(seed)
    entries = []
    ok = True
    for cfg in configs:
        mech, pair, declared, flags = build_audit_target(cfg, rng)
        report = empirical_epsilon_audit(
            mech, pair, trials, rng, delta_assumed=declared.delta, eps_declared=declared.eps,
            label=cfg.mechanism, non_private_components=flags)
        entry = {"audit": report.as_dict(), "consistent": report.consistent}
        if cfg.check_distribution and cfg.mechanism == "known_cov":
            entry["distribution"] = _known_cov_distribution_check(cfg, trials, rng)
        entries.append(entry)
        ok = ok and report.consistent
    doc = {"trials": trials, "seed": seed, "entries": entries, "all_consistent": ok}
    return _jsonable(doc), EXIT_OK if ok else EXIT_ERROR


def _known_cov_distribution_check(cfg: AuditConfig, trials: int, rng) -> dict:
    # fresh N(0, I) datasets each run; outputs should be N(0, I) up to truncation
    params = gaussian.derive_known_cov_params(cfg.d, 0.0, cfg.budget, cfg.alpha, cfg.profile)
    out = np.array([gaussian.spherical_gaussian_sampler(rng.standard_normal((params.n, cfg.d)), params, rng)
                    for _ in range(trials)])
    res = energy_block_test(out, rng.standard_normal((trials, cfg.d)))
    return {"test": res.method, "statistic": res.statistic, "p_value": res.p_value}
