"""Automated selection of problem formulation, model kind, and
hyperparameters under a trial budget.

Search is quasi-random sampling plus successive halving; Gaussian-process
machinery is reserved for product-metric tuning where it earns its keep.
All decisions are deterministic under seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import errors, models
from .core import (DecisionKind, MetricAggregation, MetricTiming, TaskKind,
                   UseCaseSpec)
from .models import Hyperparams

CV_FOLDS = 5
MIN_UNITS_PER_FOLD = 5


@dataclass(frozen=True)
class LabelDiagnostics:
    """What the observed labels look like, computed upstream of task choice."""

    binary_labels: bool = False
    real_labels: bool = False
    variant_labeled: bool = False  # rows tagged with experiment variants


@dataclass(frozen=True)
class HyperparamRange:
    low: float
    high: float
    log_scale: bool = False
    integer: bool = False


@dataclass(frozen=True)
class SearchSpace:
    ranges: dict[str, HyperparamRange]
    defaults: Hyperparams
    budget: int
    halving_fractions: tuple[float, ...] = (0.25, 0.5, 1.0)

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        for name, r in self.ranges.items():
            default = getattr(self.defaults, name)
            if not (r.low <= default <= r.high):
                raise ValueError(f"default {name}={default} outside range")

    def sample(self, rng: np.random.RandomState) -> Hyperparams:
        kwargs = {}
        for name, r in self.ranges.items():
            if r.log_scale:
                v = float(np.exp(rng.uniform(np.log(r.low), np.log(r.high))))
            else:
                v = float(rng.uniform(r.low, r.high))
            kwargs[name] = int(round(v)) if r.integer else v
        merged = {**vars(self.defaults), **kwargs}
        return Hyperparams(**merged)


DEFAULT_SPACES = {
    "logistic": SearchSpace(
        ranges={
            "learning_rate": HyperparamRange(1e-3, 1.0, log_scale=True),
            "l2": HyperparamRange(1e-6, 1e-1, log_scale=True),
        },
        defaults=Hyperparams(learning_rate=0.1, l2=1e-4, epochs=200),
        budget=16),
    "gbdt": SearchSpace(
        ranges={
            "learning_rate": HyperparamRange(0.02, 0.5, log_scale=True),
            "depth": HyperparamRange(2, 6, integer=True),
            "rounds": HyperparamRange(20, 120, integer=True),
        },
        defaults=Hyperparams(learning_rate=0.1, depth=3, rounds=50,
                             leaf_min=10),
        budget=16),
}


@dataclass(frozen=True)
class LeaderboardEntry:
    trial_id: int
    kind: str
    hyperparams: Hyperparams
    metric: float
    metric_name: str
    rung_reached: int


def infer_task(spec: UseCaseSpec,
               diagnostics: LabelDiagnostics) -> TaskKind:
    """Deterministic rule table from spec shape and label diagnostics.

    Conflicting evidence raises AmbiguousTask rather than guessing.
    """
    delayed_cumulative = any(
        m.timing is MetricTiming.DELAYED
        and m.aggregation is MetricAggregation.CUMULATIVE_DISCOUNTED
        for m in spec.metrics)
    all_immediate = all(m.timing is MetricTiming.IMMEDIATE
                        for m in spec.metrics)
    if delayed_cumulative:
        return TaskKind.OFFLINE_RL
    if diagnostics.variant_labeled and all_immediate:
        return TaskKind.HTE
    if diagnostics.binary_labels and diagnostics.real_labels:
        raise errors.AmbiguousTask("labels look both binary and real-valued")
    if diagnostics.binary_labels \
            and spec.decision_space.kind is DecisionKind.BINARY:
        return TaskKind.BINARY_CLASSIFICATION
    if diagnostics.real_labels:
        return TaskKind.REGRESSION
    if spec.decision_space.kind is DecisionKind.MULTICLASS and all_immediate:
        return TaskKind.CONTEXTUAL_BANDIT
    raise errors.AmbiguousTask(
        "no rule matches the spec/diagnostics combination")


def _unit_folds(units: Sequence[str], n_folds: int,
                seed: int) -> dict[str, int]:
    unique = sorted(set(units))
    rng = np.random.RandomState(seed)
    rng.shuffle(unique)
    return {u: i % n_folds for i, u in enumerate(unique)}


def _cv_metric(kind: str, X: np.ndarray, y: np.ndarray,
               units: Sequence[str], hp: Hyperparams, seed: int,
               n_folds: int = CV_FOLDS) -> float:
    fold_of = _unit_folds(units, n_folds, seed)
    folds = np.array([fold_of[u] for u in units])
    classification = set(np.unique(y)) <= {0.0, 1.0}
    scores = []
    for f in range(n_folds):
        test = folds == f
        model = models.train(kind, X[~test], y[~test], hp, seed)
        pred = models.predict(model, X[test])
        if classification and len(np.unique(y[test])) == 2:
            scores.append(models.auc(pred, y[test]))
        else:
            scores.append(-float(np.sqrt(np.mean((pred - y[test]) ** 2))))
    return float(np.mean(scores))


def select_model(task: TaskKind, X: np.ndarray, y: np.ndarray,
                 units: Sequence[str], budget: int, seed: int,
                 ) -> tuple[models.ModelArtifact, list[LeaderboardEntry]]:
    """Pick a model family and hyperparameters by successive halving.

    Trials start on 25% of the data and the top half advances each rung;
    survivors are ranked by unit-disjoint 5-fold CV. Ties go to the
    lower-parameter-count candidate (logistic before gbdt).
    """
    n_units = len(set(units))
    if n_units < CV_FOLDS * MIN_UNITS_PER_FOLD:
        raise errors.InsufficientData(
            f"{n_units} units, need {CV_FOLDS * MIN_UNITS_PER_FOLD}")
    rng = np.random.RandomState(seed)
    kinds = ["logistic", "gbdt"]
    classification = set(np.unique(y)) <= {0.0, 1.0}
    if not classification:
        kinds = ["linear", "gbdt"]
    trials: list[tuple[int, str, Hyperparams]] = []
    for trial_id in range(budget):
        kind = kinds[trial_id % 2]
        space_key = "logistic" if kind in ("logistic", "linear") else "gbdt"
        if trial_id < 2:
            hp = DEFAULT_SPACES[space_key].defaults
        else:
            hp = DEFAULT_SPACES[space_key].sample(rng)
        trials.append((trial_id, kind, hp))

    # successive halving on growing data fractions
    unit_order = sorted(set(units))
    np.random.RandomState(seed + 1).shuffle(unit_order)
    unit_rank = {u: i for i, u in enumerate(unit_order)}
    ranks = np.array([unit_rank[u] for u in units])
    alive = list(trials)
    rung_reached = {t[0]: 0 for t in trials}
    fractions = (0.25, 0.5)
    for rung, frac in enumerate(fractions):
        if len(alive) <= 1:
            break
        cutoff = int(np.ceil(frac * n_units))
        mask = ranks < cutoff
        scored = []
        for trial_id, kind, hp in alive:
            score = _holdout_metric(kind, X[mask], y[mask],
                                    [u for u, m in zip(units, mask) if m],
                                    hp, seed)
            scored.append((score, trial_id, kind, hp))
            rung_reached[trial_id] = rung + 1
        scored.sort(key=lambda t: (-t[0], t[1]))
        alive = [(tid, kind, hp)
                 for _, tid, kind, hp in scored[:max(1, len(scored) // 2)]]

    leaderboard = []
    best = None
    for trial_id, kind, hp in alive:
        metric = _cv_metric(kind, X, y, units, hp, seed)
        rung_reached[trial_id] = len(fractions) + 1
        entry = LeaderboardEntry(
            trial_id=trial_id, kind=kind, hyperparams=hp, metric=metric,
            metric_name="auc" if classification else "neg_rmse",
            rung_reached=rung_reached[trial_id])
        leaderboard.append(entry)
        key = (round(metric, 9), -_complexity(kind, hp), -trial_id)
        if best is None or key > best[0]:
            best = (key, entry)
    leaderboard.sort(key=lambda e: (-e.metric, _complexity(e.kind,
                                                           e.hyperparams)))
    winner = best[1]
    artifact = models.train(winner.kind, X, y, winner.hyperparams, seed)
    from dataclasses import replace as _replace
    artifact = _replace(
        artifact,
        train_report=_replace(artifact.train_report,
                              validation_metric=winner.metric,
                              validation_metric_name=winner.metric_name))
    return artifact, leaderboard


def _complexity(kind: str, hp: Hyperparams) -> int:
    if kind in ("logistic", "linear"):
        return 1
    return 2 + hp.rounds * (2 ** hp.depth)


def _holdout_metric(kind, X, y, units, hp, seed) -> float:
    fold_of = _unit_folds(units, 4, seed)
    folds = np.array([fold_of[u] for u in units])
    test = folds == 0
    if test.all() or (~test).all() or len(np.unique(y[~test])) < 2:
        return -np.inf
    model = models.train(kind, X[~test], y[~test], hp, seed)
    pred = models.predict(model, X[test])
    if set(np.unique(y)) <= {0.0, 1.0} and len(np.unique(y[test])) == 2:
        return models.auc(pred, y[test])
    return -float(np.sqrt(np.mean((pred - y[test]) ** 2)))


def tune_hyperparams(kind: str, X: np.ndarray, y: np.ndarray,
                     units: Sequence[str], space: SearchSpace,
                     budget: int, seed: int) -> Hyperparams:
    """Quasi-random search; the defaults are always trial 0, so the result
    is never worse than the defaults on the validation metric."""
    rng = np.random.RandomState(seed)
    best_hp, best_score = None, -np.inf
    for trial_id in range(budget):
        hp = space.defaults if trial_id == 0 else space.sample(rng)
        score = _holdout_metric(kind, X, y, units, hp, seed)
        if score > best_score:
            best_hp, best_score = hp, score
    return best_hp
