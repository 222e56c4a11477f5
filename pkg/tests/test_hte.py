import numpy as np
import pytest

from declab import errors, hte, policy, simlab
from declab.hte import RctDataset, RctRow


def _rct(n=2000, seed=0, p_treat=0.5):
    """Randomized data from the sign-flip environment: tau(x) flips on x0."""
    env = simlab.catalog()["hte-signflip"]

    def agent(x, rng):
        treat = rng.random_sample() < p_treat
        return env.actions[int(treat)], p_treat if treat else 1.0 - p_treat

    sim_rows = simlab.simulate_cohort(env, agent, n, seed=seed)
    rows = [RctRow(
        x=np.array([r.features[f"x{j}"] for j in range(env.dimension)]),
        variant=env.actions.index(r.action),
        outcomes=dict(r.metrics)) for r in sim_rows]
    return RctDataset(rows=tuple(rows), assignment_propensity=p_treat,
                      metrics=env.metrics)


@pytest.fixture(scope="module")
def rct():
    return _rct()


class TestFitting:
    def test_t_learner_recovers_sign_structure(self, rct):
        model = hte.fit_meta_learner("T", rct, "reward", seed=0)
        X = np.array([[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0]])
        tau = hte.predict_uplift(model, X)
        assert tau[0] > 0.02 and tau[1] < -0.02

    def test_x_learner_recovers_sign_structure(self, rct):
        model = hte.fit_meta_learner("X", rct, "reward", seed=0)
        X = np.array([[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0]])
        tau = hte.predict_uplift(model, X)
        assert tau[0] > 0.02 and tau[1] < -0.02
        assert model.tau0 is not None and model.tau1 is not None
        assert model.blend_weight == 0.5

    def test_average_uplift_near_zero_ate(self, rct):
        # sign-flip construction: ATE ~ 0 though per-unit effects are +-0.1
        model = hte.fit_meta_learner("T", rct, "reward", seed=0)
        X = np.stack([r.x for r in rct.rows])
        assert abs(hte.predict_uplift(model, X).mean()) < 0.03

    def test_unknown_metric(self, rct):
        with pytest.raises(errors.UnknownMetric):
            hte.fit_meta_learner("T", rct, "nope", seed=0)

    def test_missing_arm(self):
        small = _rct(n=150, seed=1, p_treat=0.1)
        with pytest.raises(errors.MissingArm):
            hte.fit_meta_learner("T", small, "reward", seed=0)

    def test_unknown_learner_kind(self, rct):
        with pytest.raises(ValueError):
            hte.fit_meta_learner("S", rct, "reward", seed=0)

    def test_deterministic_under_seed(self, rct):
        a = hte.fit_meta_learner("T", rct, "reward", seed=7)
        b = hte.fit_meta_learner("T", rct, "reward", seed=7)
        X = np.stack([r.x for r in rct.rows[:50]])
        assert np.array_equal(hte.predict_uplift(a, X),
                              hte.predict_uplift(b, X))


class TestPolicyDerivation:
    def test_treat_iff_uplift_clears_threshold(self, rct):
        model = hte.fit_meta_learner("T", rct, "reward", seed=0)
        pol = hte.derive_assignment_policy(model, cost_threshold=0.0,
                                           epsilon=0.0)
        assert pol.kind == "uplift"
        out_pos = hte.policy_outputs(model, np.array([2.0, 0.0, 0.0]))
        out_neg = hte.policy_outputs(model, np.array([-2.0, 0.0, 0.0]))
        assert pol.greedy_action(out_pos) == "treatment"
        assert pol.greedy_action(out_neg) == "control"

    def test_cost_threshold_suppresses_small_effects(self, rct):
        model = hte.fit_meta_learner("T", rct, "reward", seed=0)
        pol = hte.derive_assignment_policy(model, cost_threshold=0.5)
        out = hte.policy_outputs(model, np.array([2.0, 0.0, 0.0]))
        assert pol.greedy_action(out) == "control"  # tau ~ 0.1 < 0.5

    def test_minimize_metric_flips_sign(self, rct):
        model = hte.fit_meta_learner("T", rct, "reward", seed=0)
        out = hte.policy_outputs(model, np.array([2.0, 0.0, 0.0]),
                                 minimize_metric=True)
        assert out["treatment"] < 0

    def test_propensities_are_exact(self, rct):
        model = hte.fit_meta_learner("T", rct, "reward", seed=0)
        pol = hte.derive_assignment_policy(model, epsilon=0.1)
        out = hte.policy_outputs(model, np.array([2.0, 0.0, 0.0]))
        assert policy.propensity_of(pol, out, "treatment") \
            == 1.0 - 0.1 + 0.1 / 2


class TestSegments:
    def test_quintiles_cover_everything_and_order_by_uplift(self, rct):
        model = hte.fit_meta_learner("T", rct, "reward", seed=0)
        report = hte.segment_analysis(model, rct)
        assert report.metric == "reward"
        assert len(report.segments) == 5
        assert sum(s.n for s in report.segments) == len(rct.rows)
        means = [s.mean_uplift for s in report.segments]
        assert means == sorted(means)

    def test_empirical_lift_tracks_predicted_uplift(self, rct):
        # bottom quintile should show negative lift, top positive
        model = hte.fit_meta_learner("T", rct, "reward", seed=0)
        report = hte.segment_analysis(model, rct)
        bottom, top = report.segments[0], report.segments[-1]
        assert top.empirical_lift > bottom.empirical_lift
        assert top.empirical_lift > 0
        assert bottom.empirical_lift < 0
        assert np.isfinite(top.lift_stderr) and top.lift_stderr > 0

    def test_top_features_flag_the_driver(self, rct):
        # segments sorted by tau ~ sign(x0): extreme segments skew on col 0
        model = hte.fit_meta_learner("T", rct, "reward", seed=0)
        report = hte.segment_analysis(model, rct)
        assert report.segments[-1].top_features[0][0] == 0

    def test_insufficient_rows(self, rct):
        model = hte.fit_meta_learner("T", rct, "reward", seed=0)
        tiny = RctDataset(rows=rct.rows[:60],
                          assignment_propensity=0.5, metrics=rct.metrics)
        with pytest.raises(errors.InsufficientData):
            hte.segment_analysis(model, tiny)

    def test_bad_assignment_propensity(self):
        with pytest.raises(ValueError):
            RctDataset(rows=(), assignment_propensity=1.0, metrics=("m",))
