"""Black-box lower bounds on epsilon from two neighbouring datasets.

The trials are split in half. The first half chooses one output event (and
which dataset plays the "likely" role); the second half certifies it with
one-sided Clopper-Pearson bounds p_lo on one side and p_hi on the other, and
the reported lower bound is ln((p_lo - delta) / p_hi). Because exactly one
event is certified, the bound holds at the stated confidence.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Callable, Sequence

import numpy as np

from privsample.errors import InvalidInputError
from privsample.stats import clopper_pearson_one_sided

N_THRESHOLDS = 64


@dataclasses.dataclass(frozen=True)
class AuditReport:
    mechanism: str
    eps_declared: float | None
    eps_lower_bound: float
    confidence: float
    trials: int
    events_family: str
    non_private_components: tuple = ()
    details: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise InvalidInputError("confidence must lie in (0, 1)")
        if self.eps_lower_bound < 0:
            raise InvalidInputError("lower bound must be nonnegative")

    @property
    def consistent(self) -> bool:
        """True unless the audit refutes the declared epsilon."""
        return self.eps_declared is None or self.eps_lower_bound <= self.eps_declared

    def as_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "eps_declared": self.eps_declared,
            "eps_lower_bound": self.eps_lower_bound,
            "confidence": self.confidence,
            "trials": self.trials,
            "events_family": self.events_family,
            "non_private_components": list(self.non_private_components),
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


Event = tuple[str, Callable[[np.ndarray], np.ndarray]]


def _collect(mechanism, data, trials, rng) -> tuple[np.ndarray, np.ndarray]:
    # outputs as an (trials, k) float array plus a bottom mask
    rows, bottom = [], np.zeros(trials, dtype=bool)
    for t in range(trials):
        out = mechanism(data, rng)
        if out is None:
            bottom[t] = True
            rows.append(None)
        else:
            rows.append(np.atleast_1d(np.asarray(out, dtype=float)))
    width = next((r.size for r in rows if r is not None), 1)
    Y = np.full((trials, width), np.nan)
    for t, r in enumerate(rows):
        if r is not None:
            Y[t] = r
    return Y, bottom


def _halfspace_events(Ya, Yb) -> tuple[list[Event], np.ndarray]:
    ok_a, ok_b = ~np.isnan(Ya[:, 0]), ~np.isnan(Yb[:, 0])
    if Ya.shape[1] == 1:
        direction = np.ones(1)
    else:
        diff = (np.nan_to_num(Ya[ok_a]).mean(axis=0) if ok_a.any() else 0) - (
            np.nan_to_num(Yb[ok_b]).mean(axis=0) if ok_b.any() else 0)
        norm = np.linalg.norm(diff)
        direction = diff / norm if norm > 0 else np.eye(Ya.shape[1])[0]
    pooled = np.concatenate([Ya[ok_a] @ direction, Yb[ok_b] @ direction])
    events: list[Event] = [("bottom", lambda Y: np.isnan(Y[:, 0]))]
    if pooled.size:
        for t in np.unique(np.quantile(pooled, np.linspace(0, 1, N_THRESHOLDS + 1)[1:-1])):
            events.append((f"proj>{t:.6g}", lambda Y, t=t: np.nan_to_num(Y @ direction, nan=-np.inf) > t))
            events.append((f"proj<={t:.6g}", lambda Y, t=t: np.nan_to_num(Y @ direction, nan=np.inf) <= t))
    return events, direction


def empirical_epsilon_audit(
    mechanism: Callable,
    neighbor_pair: tuple,
    trials: int,
    rng: np.random.Generator,
    delta_assumed: float = 0.0,
    events: Sequence[Event] | None = None,
    confidence: float = 0.95,
    eps_declared: float | None = None,
    label: str = "mechanism",
    non_private_components: Sequence[str] = (),
) -> AuditReport:
    """Lower confidence bound on epsilon for `mechanism` on one neighbour pair.

    Args:
        mechanism: Callable ``(dataset, rng) -> output``; ``None`` encodes bottom.
        neighbor_pair: Two datasets differing in one record.
        trials: Mechanism runs per dataset (half select, half certify).
        rng: Generator for all mechanism runs.
        delta_assumed: The delta the bound is computed against.
        events: Optional explicit ``(name, predicate)`` family; predicates take
            the (trials, k) output array (NaN rows for bottom) and return a
            boolean mask. Defaults to half-space thresholds on a 1-d
            projection along the selection half's mean difference, plus the
            bottom event.
        confidence: Overall confidence of the reported bound.
        eps_declared: Declared epsilon, echoed into the report.
        label: Mechanism name for the report.
        non_private_components: Names copied into the report.
    """
    if trials < 4:
        raise InvalidInputError("need at least four trials")
    if not 0 <= delta_assumed < 1:
        raise InvalidInputError("delta_assumed must lie in [0, 1)")
    data_a, data_b = neighbor_pair
    Ya, bot_a = _collect(mechanism, data_a, trials, rng)
    Yb, bot_b = _collect(mechanism, data_b, trials, rng)
    half = trials // 2
    if events is None:
        family = "halfspace-1d-projection"
        candidates, _ = _halfspace_events(Ya[:half], Yb[:half])
    else:
        family = "explicit"
        candidates = list(events)
        if not candidates:
            raise InvalidInputError("event family is empty")

    # selection: plug-in estimate with a one-count pseudo-prior
    best, best_score = None, -math.inf
    for name, pred in candidates:
        ka = int(np.count_nonzero(pred(Ya[:half])))
        kb = int(np.count_nonzero(pred(Yb[:half])))
        for hi_count, lo_count, order in ((ka, kb, "a>b"), (kb, ka, "b>a")):
            p = (hi_count + 0.5) / (half + 1)
            q = (lo_count + 0.5) / (half + 1)
            if p - delta_assumed <= 0:
                continue
            score = math.log((p - delta_assumed) / q)
            if score > best_score:
                best, best_score = (name, pred, order), score

    m = trials - half
    a = (1 - confidence) / 2
    eps_lb, detail = 0.0, {"selected_event": None}
    if best is not None:
        name, pred, order = best
        ka = int(np.count_nonzero(pred(Ya[half:])))
        kb = int(np.count_nonzero(pred(Yb[half:])))
        k_hi, k_lo = (ka, kb) if order == "a>b" else (kb, ka)
        p_lo = clopper_pearson_one_sided(k_hi, m, 1 - a, upper=False)
        p_hi = clopper_pearson_one_sided(k_lo, m, 1 - a, upper=True)
        if p_lo > delta_assumed and p_hi > 0:
            eps_lb = max(0.0, math.log((p_lo - delta_assumed) / p_hi))
        detail = {"selected_event": name, "order": order, "certify_counts": [k_hi, k_lo],
                  "p_lower": p_lo, "p_upper": p_hi}
    detail.update({"bottom_rate": [float(bot_a.mean()), float(bot_b.mean())],
                   "delta_assumed": delta_assumed})
    return AuditReport(
        mechanism=label, eps_declared=eps_declared, eps_lower_bound=float(eps_lb),
        confidence=confidence, trials=trials, events_family=family,
        non_private_components=tuple(non_private_components), details=detail,
    )
