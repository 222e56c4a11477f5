"""Counterfactual policy evaluation on logged bandit data.

Estimators: inverse propensity scoring (IPS), self-normalized IPS (SNIPS),
and doubly robust (DR), each with percentile-bootstrap confidence intervals
and importance-weight diagnostics. Behavior propensities are floored at
0.01 before weighting (biased but bounded); the clipped fraction is exposed
so callers can warn.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import errors

PROPENSITY_FLOOR = 0.01
BOOTSTRAP_B = 1000


@dataclass(frozen=True)
class LoggedBanditRow:
    x: np.ndarray
    action: str
    propensity: float
    rewards: dict[str, float]


@dataclass(frozen=True)
class LoggedBanditDataset:
    rows: tuple[LoggedBanditRow, ...]
    actions: tuple[str, ...]
    metrics: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        for row in self.rows:
            if row.propensity <= 0:
                raise errors.ZeroPropensity(
                    f"logged propensity {row.propensity}")


# A target policy maps a context to an action distribution.
TargetPolicy = Callable[[np.ndarray], Mapping[str, float]]
# An outcome model maps (context, action) to an expected reward per metric.
OutcomeModel = Callable[[np.ndarray, str], Mapping[str, float]]


@dataclass(frozen=True)
class PolicyEvaluation:
    estimator: str
    estimates: dict[str, float]
    intervals: dict[str, tuple[float, float]]
    effective_sample_size: float
    max_weight: float
    clipped_fraction: float
    n: int


def _weights(data: LoggedBanditDataset, pi: TargetPolicy) -> np.ndarray:
    w = np.empty(len(data.rows))
    for i, row in enumerate(data.rows):
        mu = max(row.propensity, PROPENSITY_FLOOR)
        w[i] = pi(row.x).get(row.action, 0.0) / mu
    return w


def _reward_matrix(data: LoggedBanditDataset) -> np.ndarray:
    return np.array([[row.rewards[m] for m in data.metrics]
                     for row in data.rows])


def _diagnostics(data: LoggedBanditDataset, w: np.ndarray) -> dict:
    clipped = np.mean([row.propensity < PROPENSITY_FLOOR
                       for row in data.rows])
    ssum = w.sum()
    ess = float(ssum * ssum / (w @ w)) if (w @ w) > 0 else 0.0
    return {"effective_sample_size": ess,
            "max_weight": float(w.max()) if len(w) else 0.0,
            "clipped_fraction": float(clipped)}


def _per_row_ips(data: LoggedBanditDataset, pi: TargetPolicy) -> np.ndarray:
    w = _weights(data, pi)
    return w[:, None] * _reward_matrix(data)


def ips(data: LoggedBanditDataset, pi: TargetPolicy,
        seed: Optional[int] = None) -> PolicyEvaluation:
    """Inverse propensity scoring: mean of w_i * r_i per metric."""
    if not data.rows:
        raise errors.EmptyDataset("no logged rows")
    w = _weights(data, pi)
    contrib = w[:, None] * _reward_matrix(data)
    estimates = dict(zip(data.metrics, contrib.mean(axis=0)))
    intervals = _named(_bootstrap(contrib, _mean_stat, seed), data.metrics)
    diag = _diagnostics(data, w)
    return PolicyEvaluation(estimator="ips", estimates=estimates,
                            intervals=intervals, n=len(data.rows), **diag)


def snips(data: LoggedBanditDataset, pi: TargetPolicy,
          seed: Optional[int] = None) -> PolicyEvaluation:
    """Self-normalized IPS: sum(w r) / sum(w); shift-equivariant."""
    if not data.rows:
        raise errors.EmptyDataset("no logged rows")
    w = _weights(data, pi)
    if w.sum() <= 0:
        raise errors.AllWeightsZero("target policy disjoint from logs")
    R = _reward_matrix(data)
    estimates = dict(zip(data.metrics, (w[:, None] * R).sum(axis=0) / w.sum()))
    stacked = np.hstack([w[:, None] * R, w[:, None]])

    def stat(block: np.ndarray) -> np.ndarray:
        wsum = block[:, -1].sum()
        if wsum <= 0:
            return np.full(block.shape[1] - 1, np.nan)
        return block[:, :-1].sum(axis=0) / wsum

    intervals = _named(_bootstrap(stacked, stat, seed, n_out=len(data.metrics)),
                       data.metrics)
    diag = _diagnostics(data, w)
    return PolicyEvaluation(estimator="snips", estimates=estimates,
                            intervals=intervals, n=len(data.rows), **diag)


def doubly_robust(data: LoggedBanditDataset, pi: TargetPolicy,
                  q: OutcomeModel,
                  seed: Optional[int] = None) -> PolicyEvaluation:
    """DR: direct model value plus importance-weighted model residual."""
    if not data.rows:
        raise errors.EmptyDataset("no logged rows")
    w = _weights(data, pi)
    contrib = np.empty((len(data.rows), len(data.metrics)))
    for i, row in enumerate(data.rows):
        dist = pi(row.x)
        direct = np.zeros(len(data.metrics))
        for action in data.actions:
            p = dist.get(action, 0.0)
            if p > 0:
                qa = q(row.x, action)
                direct += p * np.array([qa[m] for m in data.metrics])
        q_logged = q(row.x, row.action)
        resid = np.array([row.rewards[m] - q_logged[m] for m in data.metrics])
        contrib[i] = direct + w[i] * resid
    estimates = dict(zip(data.metrics, contrib.mean(axis=0)))
    intervals = _named(_bootstrap(contrib, _mean_stat, seed), data.metrics)
    diag = _diagnostics(data, w)
    return PolicyEvaluation(estimator="dr", estimates=estimates,
                            intervals=intervals, n=len(data.rows), **diag)


def _mean_stat(block: np.ndarray) -> np.ndarray:
    return block.mean(axis=0)


def _named(intervals: dict, metrics: Sequence[str]) -> dict:
    return {metrics[i]: v for i, v in intervals.items()}


def _bootstrap(contrib: np.ndarray, stat: Callable[[np.ndarray], np.ndarray],
               seed: Optional[int], b: int = BOOTSTRAP_B,
               n_out: Optional[int] = None) -> dict:
    """95% percentile bootstrap over per-row contributions.

    Returns per-output (lo, hi); skipped (point-only) when seed is None.
    """
    n = contrib.shape[0]
    n_out = n_out if n_out is not None else contrib.shape[1]
    point = stat(contrib)[:n_out]
    if seed is None:
        return {i: (float(p), float(p)) for i, p in enumerate(point)}
    if n < 30:
        raise errors.TooFewRows(f"bootstrap needs n >= 30, got {n}")
    master = np.random.RandomState(seed)
    replicate_seeds = master.randint(0, 2 ** 31 - 1, size=b)
    stats = np.empty((b, n_out))
    for r in range(b):
        rng = np.random.RandomState(replicate_seeds[r])
        idx = rng.randint(0, n, size=n)
        stats[r] = stat(contrib[idx])[:n_out]
    lo = np.nanpercentile(stats, 2.5, axis=0)
    hi = np.nanpercentile(stats, 97.5, axis=0)
    out = {}
    for i in range(n_out):
        lo_i = min(lo[i], point[i])
        hi_i = max(hi[i], point[i])
        out[i] = (float(lo_i), float(hi_i))
    return out
