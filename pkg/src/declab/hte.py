"""Heterogeneous-treatment-effect personalization.

T- and X-learners over randomized-experiment data, uplift prediction,
assignment-policy derivation, and quintile segment analysis for
interpretability. Assignment propensity is treated as the known constant
recorded at logging time (the data comes from randomized experiments).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import errors, models
from .models import Hyperparams, ModelArtifact
from .policy import DecisionPolicy

MIN_ROWS_PER_ARM = 100


@dataclass(frozen=True)
class RctRow:
    x: np.ndarray
    variant: int  # 0 = control, 1 = treatment
    outcomes: dict[str, float]


@dataclass(frozen=True)
class RctDataset:
    rows: tuple[RctRow, ...]
    assignment_propensity: float  # constant P(treatment)
    metrics: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if not (0.0 < self.assignment_propensity < 1.0):
            raise ValueError("assignment propensity must be in (0, 1)")

    def arm(self, variant: int) -> list[RctRow]:
        return [r for r in self.rows if r.variant == variant]


@dataclass(frozen=True)
class UpliftModel:
    learner: str  # "T" | "X"
    metric: str
    mu0: ModelArtifact
    mu1: ModelArtifact
    tau0: Optional[ModelArtifact] = None  # X-learner imputed-effect models
    tau1: Optional[ModelArtifact] = None
    blend_weight: float = 0.5  # g(x) = assignment propensity


@dataclass(frozen=True)
class Segment:
    index: int
    n: int
    mean_uplift: float
    mean_outcome_control: float
    mean_outcome_treatment: float
    empirical_lift: float
    lift_stderr: float
    top_features: tuple[tuple[int, float], ...]  # (column, |z-diff|)


@dataclass(frozen=True)
class SegmentReport:
    metric: str
    segments: tuple[Segment, ...]


DEFAULT_HP = Hyperparams(learning_rate=0.1, rounds=80, depth=3, leaf_min=20)


def fit_meta_learner(kind: str, data: RctDataset, metric: str, seed: int,
                     base_kind: str = "gbdt",
                     hp: Hyperparams = DEFAULT_HP) -> UpliftModel:
    """Fit a T- or X-learner for one metric.

    T: per-arm outcome models, tau(x) = mu1(x) - mu0(x).
    X: impute D1 = y - mu0(x) on treated and D0 = mu1(x) - y on control,
    fit tau1/tau0 on the imputations, blend with g = assignment propensity:
    tau(x) = g * tau0(x) + (1 - g) * tau1(x).
    """
    if metric not in data.metrics:
        raise errors.UnknownMetric(metric)
    control, treated = data.arm(0), data.arm(1)
    if len(control) < MIN_ROWS_PER_ARM or len(treated) < MIN_ROWS_PER_ARM:
        raise errors.MissingArm(
            f"need >= {MIN_ROWS_PER_ARM} rows per arm, have "
            f"{len(control)}/{len(treated)}")
    X0 = np.stack([r.x for r in control])
    y0 = np.array([r.outcomes[metric] for r in control])
    X1 = np.stack([r.x for r in treated])
    y1 = np.array([r.outcomes[metric] for r in treated])
    mu0 = models.train(base_kind, X0, y0, hp, seed)
    mu1 = models.train(base_kind, X1, y1, hp, seed + 1)
    if kind == "T":
        return UpliftModel(learner="T", metric=metric, mu0=mu0, mu1=mu1,
                           blend_weight=data.assignment_propensity)
    if kind == "X":
        d1 = y1 - models.predict(mu0, X1)
        d0 = models.predict(mu1, X0) - y0
        tau1 = models.train(base_kind, X1, d1, hp, seed + 2)
        tau0 = models.train(base_kind, X0, d0, hp, seed + 3)
        return UpliftModel(learner="X", metric=metric, mu0=mu0, mu1=mu1,
                           tau0=tau0, tau1=tau1,
                           blend_weight=data.assignment_propensity)
    raise ValueError(f"unknown meta-learner {kind!r}")


def predict_uplift(model: UpliftModel, X: np.ndarray) -> np.ndarray:
    """Estimated per-unit treatment effect, same units as the metric."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if model.learner == "T":
        return models.predict(model.mu1, X) - models.predict(model.mu0, X)
    g = model.blend_weight
    return g * models.predict(model.tau0, X) \
        + (1.0 - g) * models.predict(model.tau1, X)


def derive_assignment_policy(model: UpliftModel, cost_threshold: float = 0.0,
                             epsilon: float = 0.05,
                             minimize_metric: bool = False,
                             version: str = "uplift-v1") -> DecisionPolicy:
    """Treat iff estimated uplift clears the cost threshold.

    For minimize-direction metrics the comparison flips (treat when the
    effect is below the negated threshold); realized as a sign flip on the
    uplift output so the policy rule stays "tau > theta".
    """
    return DecisionPolicy(
        kind="uplift", actions=("control", "treatment"), epsilon=epsilon,
        theta=cost_threshold, version=version,
        param_space={"theta": (-1.0, 1.0)})


def policy_outputs(model: UpliftModel, x: np.ndarray,
                   minimize_metric: bool = False) -> dict[str, float]:
    """Model outputs feeding an uplift DecisionPolicy for one unit."""
    tau = float(predict_uplift(model, x)[0])
    if minimize_metric:
        tau = -tau
    return {"control": 0.0, "treatment": tau}


def segment_analysis(model: UpliftModel, data: RctDataset,
                     n_segments: int = 5) -> SegmentReport:
    """Bucket units by predicted-uplift quantile and profile each bucket.

    Per segment: mean predicted uplift, empirical per-arm outcomes with a
    lift standard error, and the top-3 features by absolute z-score
    difference against the population.
    """
    if len(data.rows) < n_segments * 20:
        raise errors.InsufficientData(
            f"need >= {n_segments * 20} rows for {n_segments} segments")
    X = np.stack([r.x for r in data.rows])
    y = np.array([r.outcomes[model.metric] for r in data.rows])
    variant = np.array([r.variant for r in data.rows])
    tau = predict_uplift(model, X)
    order = np.argsort(tau, kind="mergesort")
    bounds = np.linspace(0, len(order), n_segments + 1).astype(int)
    pop_mean = X.mean(axis=0)
    pop_std = X.std(axis=0)
    pop_std[pop_std == 0] = 1.0
    segments = []
    for k in range(n_segments):
        idx = order[bounds[k]:bounds[k + 1]]
        in_t = idx[variant[idx] == 1]
        in_c = idx[variant[idx] == 0]
        mean_t = float(y[in_t].mean()) if len(in_t) else float("nan")
        mean_c = float(y[in_c].mean()) if len(in_c) else float("nan")
        lift = mean_t - mean_c
        se = float(np.sqrt(
            (y[in_t].var(ddof=1) / max(1, len(in_t)))
            + (y[in_c].var(ddof=1) / max(1, len(in_c))))) \
            if len(in_t) > 1 and len(in_c) > 1 else float("nan")
        zdiff = np.abs((X[idx].mean(axis=0) - pop_mean) / pop_std)
        top = tuple(sorted(
            ((int(j), float(zdiff[j])) for j in np.argsort(-zdiff)[:3]),
            key=lambda t: -t[1]))
        segments.append(Segment(
            index=k, n=len(idx), mean_uplift=float(tau[idx].mean()),
            mean_outcome_control=mean_c, mean_outcome_treatment=mean_t,
            empirical_lift=lift, lift_stderr=se, top_features=top))
    return SegmentReport(metric=model.metric, segments=tuple(segments))
