"""Domain vocabulary: use-case specs, decision spaces, metrics, feature schemas.

Everything here is an immutable value object plus pure validation and
canonicalization functions; safe to share across threads.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Union

from . import errors

DEFAULT_RETENTION_DAYS = 35.0


class _Missing:
    """Sentinel for an explicitly-missing feature value."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MISSING"


MISSING = _Missing()

FeatureValue = Union[float, str, _Missing]


class TaskKind(enum.Enum):
    BINARY_CLASSIFICATION = "binary_classification"
    REGRESSION = "regression"
    MULTICLASS_VALUE = "multiclass_value"
    HTE = "hte"
    CONTEXTUAL_BANDIT = "contextual_bandit"
    OFFLINE_RL = "offline_rl"


class DecisionKind(enum.Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"
    RANKING_CANDIDATE_SET = "ranking-candidate-set"


@dataclass(frozen=True)
class DecisionSpace:
    actions: tuple[str, ...]
    kind: DecisionKind

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))


class MetricDirection(enum.Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class MetricTiming(enum.Enum):
    IMMEDIATE = "immediate"
    DELAYED = "delayed"


class MetricAggregation(enum.Enum):
    MEAN = "mean"
    CUMULATIVE_DISCOUNTED = "cumulative-discounted"


@dataclass(frozen=True)
class ProductMetricSpec:
    name: str
    direction: MetricDirection = MetricDirection.MAXIMIZE
    timing: MetricTiming = MetricTiming.IMMEDIATE
    aggregation: MetricAggregation = MetricAggregation.MEAN
    guardrail: Optional[float] = None


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    type: str  # "numeric" | "categorical"
    required: bool = False


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[FeatureColumn, ...]
    version: int = 1

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))

    def column(self, name: str) -> Optional[FeatureColumn]:
        for c in self.columns:
            if c.name == name:
                return c
        return None

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)


@dataclass(frozen=True)
class FeatureVector:
    """Canonical feature values keyed by schema column name."""

    values: Mapping[str, FeatureValue]
    dropped_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))

    def get(self, name: str) -> FeatureValue:
        return self.values.get(name, MISSING)


@dataclass(frozen=True)
class UseCaseSpec:
    id: str
    decision_space: DecisionSpace
    metrics: tuple[ProductMetricSpec, ...]
    features: FeatureSchema
    task_hint: Optional[TaskKind] = None
    join_window: float = 3600.0  # seconds
    retention_days: float = DEFAULT_RETENTION_DAYS
    exploration_epsilon: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "metrics", tuple(self.metrics))

    def metric(self, name: str) -> Optional[ProductMetricSpec]:
        for m in self.metrics:
            if m.name == name:
                return m
        return None

    @property
    def metric_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.metrics)


@dataclass(frozen=True)
class ValidatedSpec:
    """A normalized UseCaseSpec that passed validation."""

    spec: UseCaseSpec


def validate_spec(spec: UseCaseSpec) -> ValidatedSpec:
    """Validate and normalize a use-case spec.

    Normalization sorts metrics by name and pins the feature schema at
    version 1. All problems are collected and raised together as a
    ``SpecValidationError`` so callers can render them field by field.
    """
    problems = []
    if not spec.id:
        problems.append({"field": "id", "error": "EmptyId"})
    if len(spec.decision_space.actions) < 1:
        problems.append({"field": "decision_space", "error": "EmptyDecisionSpace"})
    if len(set(spec.decision_space.actions)) != len(spec.decision_space.actions):
        problems.append({"field": "decision_space", "error": "DuplicateAction"})
    if (spec.decision_space.kind is DecisionKind.BINARY
            and len(spec.decision_space.actions) != 2):
        problems.append({"field": "decision_space", "error": "BinaryNeedsTwoActions"})
    if len(spec.metrics) < 1:
        problems.append({"field": "metrics", "error": "NoMetrics"})
    names = [m.name for m in spec.metrics]
    if len(set(names)) != len(names):
        problems.append({"field": "metrics", "error": "DuplicateMetric"})
    for m in spec.metrics:
        if (m.aggregation is MetricAggregation.CUMULATIVE_DISCOUNTED
                and m.timing is not MetricTiming.DELAYED):
            problems.append({"field": f"metrics.{m.name}",
                             "error": "CumulativeRequiresDelayed"})
    if spec.join_window <= 0:
        problems.append({"field": "join_window", "error": "BadWindow"})
    if spec.retention_days * 86400.0 < spec.join_window:
        problems.append({"field": "retention_days", "error": "BadWindow"})
    if not (0.0 <= spec.exploration_epsilon <= 1.0):
        problems.append({"field": "exploration_epsilon", "error": "BadEpsilon"})
    schema_names = [c.name for c in spec.features.columns]
    if len(set(schema_names)) != len(schema_names):
        problems.append({"field": "features", "error": "DuplicateColumn"})
    if problems:
        raise errors.SpecValidationError(problems)

    normalized = replace(
        spec,
        metrics=tuple(sorted(spec.metrics, key=lambda m: m.name)),
        features=replace(spec.features, version=1),
    )
    return ValidatedSpec(spec=normalized)


def canonicalize(raw: Mapping[str, object], schema: FeatureSchema) -> FeatureVector:
    """Project a raw feature map onto a schema.

    Unknown keys are dropped and counted; absent required columns become
    explicit missing markers. Values are strictly typed: a category token
    in a numeric column raises ``TypeMismatch`` rather than being coerced.
    """
    values: dict[str, FeatureValue] = {}
    dropped = 0
    for key, value in raw.items():
        col = schema.column(key)
        if col is None:
            dropped += 1
            continue
        if value is MISSING or value is None:
            values[key] = MISSING
            continue
        if col.type == "numeric":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise errors.TypeMismatch(
                    f"column {key!r} is numeric but got {value!r}")
            values[key] = float(value)
        else:
            if not isinstance(value, str):
                raise errors.TypeMismatch(
                    f"column {key!r} is categorical but got {value!r}")
            values[key] = value
    for col in schema.columns:
        if col.required and col.name not in values:
            values[col.name] = MISSING
    return FeatureVector(values=values, dropped_count=dropped)
