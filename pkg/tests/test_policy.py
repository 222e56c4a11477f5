import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from declab import errors
from declab.policy import (DecisionPolicy, action_distribution, decide,
                           propensity_of, rank_items)


def threshold_policy(theta=0.5, epsilon=0.1):
    return DecisionPolicy(kind="threshold", actions=("reject", "accept"),
                          epsilon=epsilon, theta=theta)


class TestGreedy:
    def test_threshold_boundary_accepts(self):
        pol = threshold_policy(theta=0.7)
        assert pol.greedy_action({"reject": 0.0, "accept": 0.7}) == "accept"
        assert pol.greedy_action({"reject": 0.0, "accept": 0.699}) == "reject"

    def test_uplift_strictly_above_threshold(self):
        pol = DecisionPolicy(kind="uplift", actions=("control", "treatment"),
                             theta=0.0)
        assert pol.greedy_action({"control": 0.0, "treatment": 0.0}) \
            == "control"
        assert pol.greedy_action({"control": 0.0, "treatment": 0.01}) \
            == "treatment"

    def test_value_argmax_ties_break_to_first_action(self):
        pol = DecisionPolicy(kind="rl-greedy", actions=("a", "b", "c"))
        assert pol.greedy_action({"a": 1.0, "b": 1.0, "c": 1.0}) == "a"

    def test_value_argmax_with_metric_weights(self):
        pol = DecisionPolicy(kind="value-argmax", actions=("a", "b"),
                             metric_weights={"m1": 1.0, "m2": 2.0})
        outputs = {"a": {"m1": 1.0, "m2": 0.0}, "b": {"m1": 0.0, "m2": 0.6}}
        assert pol.greedy_action(outputs) == "b"

    def test_missing_action_output_raises(self):
        pol = threshold_policy()
        with pytest.raises(errors.MissingActionOutput):
            pol.greedy_action({"accept": 0.9})


class TestPropensities:
    def test_exact_rationals(self):
        pol = DecisionPolicy(kind="rl-greedy", actions=("a", "b", "c"),
                             epsilon=0.3)
        outputs = {"a": 1.0, "b": 0.0, "c": 0.0}
        assert propensity_of(pol, outputs, "a") == 1.0 - 0.3 + 0.3 / 3
        assert propensity_of(pol, outputs, "b") == 0.3 / 3

    @settings(deadline=None, max_examples=50)
    @given(st.floats(0.0, 0.99), st.integers(2, 6))
    def test_distribution_sums_to_one(self, epsilon, k):
        actions = tuple(f"a{i}" for i in range(k))
        pol = DecisionPolicy(kind="rl-greedy", actions=actions,
                             epsilon=epsilon)
        outputs = {a: float(i) for i, a in enumerate(actions)}
        dist = action_distribution(pol, outputs)
        assert sum(dist.values()) == pytest.approx(1.0)
        assert all(p >= 0 for p in dist.values())

    def test_decide_deterministic_under_seed(self):
        pol = threshold_policy(epsilon=0.5)
        outputs = {"reject": 0.0, "accept": 0.9}
        assert decide(pol, outputs, seed=42) == decide(pol, outputs, seed=42)

    def test_decide_frequency_matches_propensity(self):
        pol = threshold_policy(epsilon=0.4)
        outputs = {"reject": 0.0, "accept": 0.9}
        picks = [decide(pol, outputs, seed=s)[0] for s in range(4000)]
        freq = picks.count("accept") / len(picks)
        expected = propensity_of(pol, outputs, "accept")  # 0.8
        assert freq == pytest.approx(expected, abs=0.02)

    def test_reported_propensity_matches_chosen_action(self):
        pol = threshold_policy(epsilon=0.2)
        outputs = {"reject": 0.0, "accept": 0.9}
        for seed in range(200):
            action, prop = decide(pol, outputs, seed)
            assert prop == propensity_of(pol, outputs, action)


class TestValidation:
    def test_epsilon_bounds(self):
        with pytest.raises(ValueError):
            threshold_policy(epsilon=1.0)

    def test_threshold_theta_bounds(self):
        with pytest.raises(ValueError):
            threshold_policy(theta=1.5)

    def test_negative_metric_weights_rejected(self):
        with pytest.raises(ValueError):
            DecisionPolicy(kind="value-argmax", actions=("a", "b"),
                           metric_weights={"m": -1.0})


class TestRanking:
    def test_orders_desc_with_id_tie_break(self):
        scored = {"b": 0.5, "a": 0.5, "c": 0.9}
        assert rank_items(scored) == ["c", "a", "b"]

    def test_top_n(self):
        scored = {f"i{k}": float(k) for k in range(10)}
        assert rank_items(scored, top_n=3) == ["i9", "i8", "i7"]

    def test_non_finite_scores_rejected(self):
        with pytest.raises(ValueError):
            rank_items({"a": np.nan})
