import numpy as np
import pytest

from conftest import make_spec
from declab import autoconf, core, errors, models
from declab.autoconf import (DEFAULT_SPACES, LabelDiagnostics, SearchSpace,
                             infer_task, select_model, tune_hyperparams)
from declab.core import (DecisionKind, MetricAggregation, MetricTiming,
                         TaskKind)


def _spec(metric_timing=MetricTiming.IMMEDIATE,
          metric_agg=MetricAggregation.MEAN,
          kind=DecisionKind.BINARY, actions=("reject", "accept")):
    spec = make_spec(actions=actions, kind=kind)
    metrics = tuple(core.ProductMetricSpec(
        name=m.name, timing=metric_timing, aggregation=metric_agg)
        for m in spec.metrics)
    from dataclasses import replace
    return replace(spec, metrics=metrics)


class TestInferTask:
    def test_binary_labels_binary_decision(self):
        task = infer_task(_spec(), LabelDiagnostics(binary_labels=True))
        assert task is TaskKind.BINARY_CLASSIFICATION

    def test_real_labels_give_regression(self):
        task = infer_task(_spec(), LabelDiagnostics(real_labels=True))
        assert task is TaskKind.REGRESSION

    def test_variant_labels_give_hte(self):
        task = infer_task(_spec(actions=("control", "treatment")),
                          LabelDiagnostics(binary_labels=True,
                                           variant_labeled=True))
        assert task is TaskKind.HTE

    def test_delayed_cumulative_metric_gives_offline_rl(self):
        spec = _spec(metric_timing=MetricTiming.DELAYED,
                     metric_agg=MetricAggregation.CUMULATIVE_DISCOUNTED)
        task = infer_task(spec, LabelDiagnostics(real_labels=True))
        assert task is TaskKind.OFFLINE_RL

    def test_multiclass_immediate_gives_contextual_bandit(self):
        spec = _spec(kind=DecisionKind.MULTICLASS,
                     actions=("a", "b", "c"))
        task = infer_task(spec, LabelDiagnostics())
        assert task is TaskKind.CONTEXTUAL_BANDIT

    def test_conflicting_label_shapes_are_ambiguous(self):
        with pytest.raises(errors.AmbiguousTask):
            infer_task(_spec(), LabelDiagnostics(binary_labels=True,
                                                 real_labels=True))

    def test_no_matching_rule_is_ambiguous(self):
        with pytest.raises(errors.AmbiguousTask):
            infer_task(_spec(), LabelDiagnostics())

    def test_rl_takes_precedence_over_variants(self):
        spec = _spec(metric_timing=MetricTiming.DELAYED,
                     metric_agg=MetricAggregation.CUMULATIVE_DISCOUNTED)
        task = infer_task(spec, LabelDiagnostics(variant_labeled=True))
        assert task is TaskKind.OFFLINE_RL


def _classification_data(n=600, seed=0):
    rng = np.random.RandomState(seed)
    X = rng.standard_normal((n, 4))
    p = 1.0 / (1.0 + np.exp(-(1.5 * X[:, 0] - X[:, 1])))
    y = (rng.random_sample(n) < p).astype(float)
    units = [f"u{i % 120}" for i in range(n)]
    return X, y, units


class TestSelectModel:
    def test_returns_trained_artifact_with_leaderboard(self):
        X, y, units = _classification_data()
        artifact, board = select_model(TaskKind.BINARY_CLASSIFICATION,
                                       X, y, units, budget=6, seed=0)
        assert artifact.n_features == 4
        assert artifact.train_report.validation_metric_name == "auc"
        assert artifact.train_report.validation_metric > 0.7
        assert board == sorted(
            board, key=lambda e: (-e.metric,
                                  autoconf._complexity(e.kind,
                                                       e.hyperparams)))

    def test_deterministic_under_seed(self):
        X, y, units = _classification_data()
        a, _ = select_model(TaskKind.BINARY_CLASSIFICATION, X, y, units,
                            budget=6, seed=3)
        b, _ = select_model(TaskKind.BINARY_CLASSIFICATION, X, y, units,
                            budget=6, seed=3)
        assert models.serialize(a) == models.serialize(b)

    def test_regression_uses_rmse_and_linear_family(self):
        rng = np.random.RandomState(1)
        X = rng.standard_normal((400, 3))
        y = X @ np.array([1.0, -2.0, 0.5]) + 0.1 * rng.standard_normal(400)
        units = [f"u{i % 80}" for i in range(400)]
        artifact, board = select_model(TaskKind.REGRESSION, X, y, units,
                                       budget=6, seed=0)
        assert board[0].metric_name == "neg_rmse"
        assert {e.kind for e in board} <= {"linear", "gbdt"}
        # linear signal: the linear family should win on a tie-aware sort
        assert artifact.kind == "linear"

    def test_too_few_units_rejected(self):
        X, y, _ = _classification_data(n=100)
        units = [f"u{i % 10}" for i in range(100)]
        with pytest.raises(errors.InsufficientData):
            select_model(TaskKind.BINARY_CLASSIFICATION, X, y, units,
                         budget=4, seed=0)


class TestTuneHyperparams:
    def test_never_worse_than_defaults(self):
        X, y, units = _classification_data(seed=5)
        space = DEFAULT_SPACES["gbdt"]
        for seed in range(3):
            hp = tune_hyperparams("gbdt", X, y, units, space, budget=5,
                                  seed=seed)
            tuned = autoconf._holdout_metric("gbdt", X, y, units, hp, seed)
            default = autoconf._holdout_metric("gbdt", X, y, units,
                                               space.defaults, seed)
            assert tuned >= default

    def test_search_space_validation(self):
        with pytest.raises(ValueError):
            SearchSpace(ranges={"depth": autoconf.HyperparamRange(4, 8,
                                                                  integer=True)},
                        defaults=models.Hyperparams(depth=2), budget=4)
        with pytest.raises(ValueError):
            SearchSpace(ranges={}, defaults=models.Hyperparams(), budget=0)

    def test_sampling_respects_bounds_and_types(self):
        rng = np.random.RandomState(0)
        space = DEFAULT_SPACES["gbdt"]
        for _ in range(20):
            hp = space.sample(rng)
            assert 0.02 <= hp.learning_rate <= 0.5
            assert isinstance(hp.depth, int) and 2 <= hp.depth <= 6
            assert isinstance(hp.rounds, int) and 20 <= hp.rounds <= 120
