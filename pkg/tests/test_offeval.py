import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from declab import errors, offeval
from declab.offeval import LoggedBanditDataset, LoggedBanditRow


def _logged(n=200, seed=0, eps=0.2):
    """Two-action epsilon-greedy logs over a known reward structure."""
    rng = np.random.RandomState(seed)
    rows = []
    for _ in range(n):
        x = rng.standard_normal(2)
        greedy = "b" if x[0] > 0 else "a"
        if rng.random_sample() < eps:
            action = ("a", "b")[rng.randint(2)]
        else:
            action = greedy
        prop = 1 - eps + eps / 2 if action == greedy else eps / 2
        mean = 0.7 if (action == "b" and x[0] > 0) else 0.3
        rows.append(LoggedBanditRow(
            x=x, action=action, propensity=prop,
            rewards={"r": float(rng.random_sample() < mean)}))
    return LoggedBanditDataset(rows=tuple(rows), actions=("a", "b"),
                               metrics=("r",))


def behavior_pi_factory(eps=0.2):
    def pi(x):
        greedy = "b" if x[0] > 0 else "a"
        other = "a" if greedy == "b" else "b"
        return {greedy: 1 - eps + eps / 2, other: eps / 2}
    return pi


class TestIdentities:
    def test_ips_of_behavior_policy_is_sample_mean(self):
        data = _logged()
        ev = offeval.ips(data, behavior_pi_factory())
        sample_mean = np.mean([row.rewards["r"] for row in data.rows])
        assert ev.estimates["r"] == pytest.approx(sample_mean)

    def test_dr_with_zero_outcome_model_equals_ips(self):
        data = _logged()
        pi = behavior_pi_factory()

        def zero_q(x, a):
            return {"r": 0.0}

        assert offeval.doubly_robust(data, pi, zero_q).estimates["r"] \
            == pytest.approx(offeval.ips(data, pi).estimates["r"])

    def test_snips_shift_equivariance(self):
        data = _logged()

        def pi(x):  # deterministic target, weights far from 1
            return {"b": 1.0, "a": 0.0} if x[0] > 0 else {"a": 1.0, "b": 0.0}

        shifted = LoggedBanditDataset(
            rows=tuple(LoggedBanditRow(
                x=r.x, action=r.action, propensity=r.propensity,
                rewards={"r": r.rewards["r"] + 10.0}) for r in data.rows),
            actions=data.actions, metrics=data.metrics)
        a = offeval.snips(data, pi).estimates["r"]
        b = offeval.snips(shifted, pi).estimates["r"]
        assert b == pytest.approx(a + 10.0)
        # plain IPS is not shift-equivariant under importance weighting
        c = offeval.ips(shifted, pi).estimates["r"]
        assert abs(c - (offeval.ips(data, pi).estimates["r"] + 10.0)) > 0.01


class TestDiagnostics:
    def test_ess_at_most_n(self):
        data = _logged()
        ev = offeval.ips(data, behavior_pi_factory())
        assert 0 < ev.effective_sample_size <= ev.n

    def test_ess_equals_n_for_unit_weights(self):
        data = _logged()
        ev = offeval.ips(data, behavior_pi_factory())
        # behavior policy: every weight is exactly 1
        assert ev.effective_sample_size == pytest.approx(ev.n)
        assert ev.max_weight == pytest.approx(1.0)

    def test_clipped_fraction_counts_floored_propensities(self):
        rows = [LoggedBanditRow(x=np.zeros(1), action="a",
                                propensity=0.001 if i < 5 else 0.5,
                                rewards={"r": 1.0}) for i in range(50)]
        data = LoggedBanditDataset(rows=tuple(rows), actions=("a",),
                                   metrics=("r",))
        ev = offeval.ips(data, lambda x: {"a": 1.0})
        assert ev.clipped_fraction == pytest.approx(0.1)
        # floored weight: 1 / 0.01
        assert ev.max_weight == pytest.approx(100.0)


class TestBootstrap:
    def test_intervals_contain_point_and_are_deterministic(self):
        data = _logged(n=200)
        pi = behavior_pi_factory()
        a = offeval.ips(data, pi, seed=11)
        b = offeval.ips(data, pi, seed=11)
        assert a.intervals == b.intervals
        lo, hi = a.intervals["r"]
        assert lo <= a.estimates["r"] <= hi
        assert hi > lo

    def test_different_seeds_differ(self):
        # continuous rewards so percentile grids rarely collide
        rng = np.random.RandomState(0)
        rows = tuple(LoggedBanditRow(
            x=rng.standard_normal(1), action="a", propensity=0.5,
            rewards={"r": float(rng.standard_normal())}) for _ in range(200))
        data = LoggedBanditDataset(rows=rows, actions=("a",), metrics=("r",))
        pi = lambda x: {"a": 1.0}  # noqa: E731
        assert offeval.ips(data, pi, seed=1).intervals \
            != offeval.ips(data, pi, seed=2).intervals

    def test_no_seed_gives_point_intervals(self):
        data = _logged(n=200)
        ev = offeval.ips(data, behavior_pi_factory())
        lo, hi = ev.intervals["r"]
        assert lo == hi == ev.estimates["r"]

    def test_too_few_rows(self):
        data = _logged(n=20)
        with pytest.raises(errors.TooFewRows):
            offeval.ips(data, behavior_pi_factory(), seed=0)


class TestErrors:
    def test_empty_dataset(self):
        data = LoggedBanditDataset(rows=(), actions=("a",), metrics=("r",))
        with pytest.raises(errors.EmptyDataset):
            offeval.ips(data, lambda x: {"a": 1.0})

    def test_zero_propensity_rejected_at_construction(self):
        with pytest.raises(errors.ZeroPropensity):
            LoggedBanditDataset(
                rows=(LoggedBanditRow(x=np.zeros(1), action="a",
                                      propensity=0.0, rewards={"r": 1.0}),),
                actions=("a",), metrics=("r",))

    def test_disjoint_target_policy_all_weights_zero(self):
        data = _logged(n=50)
        with pytest.raises(errors.AllWeightsZero):
            offeval.snips(data, lambda x: {"a": 0.0, "b": 0.0})


class TestAccuracy:
    def test_estimators_recover_known_target_value(self):
        # deterministic target: play "b" iff x0 > 0
        # true value: P(x0>0)*0.7 + P(x0<=0)*0.3 = 0.5
        data = _logged(n=8000, seed=3)

        def pi(x):
            return {"b": 1.0, "a": 0.0} if x[0] > 0 else {"a": 1.0, "b": 0.0}

        def q(x, a):
            return {"r": 0.7 if (a == "b" and x[0] > 0) else 0.3}

        for fn in (offeval.ips, offeval.snips):
            assert fn(data, pi).estimates["r"] == pytest.approx(0.5, abs=0.05)
        assert offeval.doubly_robust(data, pi, q).estimates["r"] \
            == pytest.approx(0.5, abs=0.05)

    @settings(deadline=None, max_examples=10)
    @given(st.integers(0, 10_000))
    def test_snips_bounded_by_reward_range(self, seed):
        data = _logged(n=100, seed=seed)
        ev = offeval.snips(data, behavior_pi_factory())
        assert 0.0 <= ev.estimates["r"] <= 1.0
