import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from declab import core, errors, eventlog, prep

from conftest import fill_log, make_spec


def _snapshot(log, now=1e6, min_rows=1):
    return log.build_dataset("uc", now=now, min_rows=min_rows)


@pytest.fixture
def fitted(log):
    fill_log(log, n=600)
    snap = _snapshot(log)
    schema = log.spec("uc").features
    return prep.fit_plan(snap, schema), snap, schema


class TestPlan:
    def test_output_dim_counts_onehot_plus_oov(self, fitted):
        plan, _, _ = fitted
        # 1 numeric + (2 vocab + 1 oov)
        assert plan.output_dim == 4
        assert plan.output_names() == ["age", "plan=free", "plan=pro",
                                       "plan=<oov>"]

    def test_encode_is_deterministic(self, fitted):
        plan, snap, _ = fitted
        a = prep.encode_rows(plan, snap.rows)
        b = prep.encode_rows(plan, snap.rows)
        assert np.array_equal(a, b)
        assert a.shape == (600, 4)

    def test_missing_numeric_takes_median(self, fitted):
        plan, _, _ = fitted
        fv = core.FeatureVector(values={"plan": "free"})
        x = prep.apply_plan(plan, fv)
        rec = plan.numeric["age"]
        expected = (np.clip(rec.median, rec.clip_lo, rec.clip_hi)
                    - rec.mean) / rec.std
        assert x[0] == pytest.approx(expected)

    def test_oov_category_goes_to_oov_bucket(self, fitted):
        plan, _, _ = fitted
        fv = core.FeatureVector(values={"age": 40.0, "plan": "enterprise"})
        x = prep.apply_plan(plan, fv)
        assert x[3] == 1.0 and x[1] == 0.0 and x[2] == 0.0

    def test_clipping_bounds_extremes(self, fitted):
        plan, _, _ = fitted
        lo = prep.apply_plan(plan, core.FeatureVector(values={"age": -1e9}))
        hi = prep.apply_plan(plan, core.FeatureVector(values={"age": 1e9}))
        rec = plan.numeric["age"]
        assert lo[0] == pytest.approx((rec.clip_lo - rec.mean) / rec.std)
        assert hi[0] == pytest.approx((rec.clip_hi - rec.mean) / rec.std)

    def test_schema_version_mismatch(self, fitted):
        plan, _, _ = fitted
        with pytest.raises(errors.SchemaVersionMismatch):
            prep.apply_plan(plan, core.FeatureVector(values={}),
                            schema_version=2)

    def test_all_missing_numeric_column_raises(self, log):
        for i in range(5):
            log.log_prediction(eventlog.PredictionEvent(
                decision_id=f"d{i}", use_case="uc", unit_id=f"u{i}",
                timestamp=1000.0 + i,
                features=core.FeatureVector(values={"plan": "free"}),
                action="accept", propensity=0.5, policy_version="v1"))
            log.log_observation("uc", eventlog.ObservationEvent(
                decision_id=f"d{i}", timestamp=1001.0 + i,
                metric_values={"conversion": 0.0}))
        snap = _snapshot(log)
        with pytest.raises(errors.AllMissingColumn):
            prep.fit_plan(snap, log.spec("uc").features)


class TestSplit:
    def test_unit_disjoint_and_deterministic(self, fitted):
        _, snap, _ = fitted
        tr, va, te = prep.split(snap, (0.6, 0.2, 0.2), seed=1)
        units = [set(r.unit_id for r in fold) for fold in (tr, va, te)]
        assert not (units[0] & units[1] or units[0] & units[2]
                    or units[1] & units[2])
        tr2, va2, te2 = prep.split(snap, (0.6, 0.2, 0.2), seed=1)
        assert tr == tr2 and va == va2 and te == te2
        assert len(tr) + len(va) + len(te) == len(snap.rows)

    def test_bad_ratios(self, fitted):
        _, snap, _ = fitted
        with pytest.raises(errors.BadRatios):
            prep.split(snap, (0.5, 0.2, 0.2), seed=1)


class TestPsi:
    def test_identical_samples_near_zero(self):
        rng = np.random.RandomState(0)
        x = rng.normal(size=5000)
        assert prep.compute_psi(x, x) < 1e-3

    def test_shifted_sample_alerts(self):
        rng = np.random.RandomState(0)
        ref = rng.normal(size=5000)
        cur = rng.normal(loc=2.0, size=5000)
        psi = prep.compute_psi(ref, cur)
        assert psi > 0.2

    def test_empty_sample_raises(self):
        with pytest.raises(errors.EmptySample):
            prep.compute_psi([], [1.0])

    def test_constant_reference_stays_finite(self):
        psi = prep.compute_psi([1.0] * 100, [1.0] * 50 + [2.0] * 50)
        assert np.isfinite(psi)

    @settings(deadline=None, max_examples=30)
    @given(st.integers(0, 2 ** 31 - 1), st.floats(-3, 3))
    def test_psi_nonnegative_and_symmetric_under_same_dist(self, seed, loc):
        rng = np.random.RandomState(seed)
        ref = rng.normal(loc=loc, size=400)
        cur = rng.normal(loc=loc, size=400)
        assert prep.compute_psi(ref, cur) >= 0.0

    def test_drift_report_flags_worst_column(self):
        rng = np.random.RandomState(1)
        report = prep.drift_report(
            {"a": rng.normal(size=2000), "b": rng.normal(size=2000)},
            {"a": rng.normal(size=2000), "b": rng.normal(3.0, size=2000)})
        assert report.alert
        assert report.overall_max_psi == report.per_column_psi["b"]
        assert report.per_column_psi["a"] < 0.05


class TestResample:
    def test_downsample_balances_to_minority(self):
        labels = [0] * 90 + [1] * 10
        idx = prep.resample_balanced(labels, "down", seed=0)
        labels = np.asarray(labels)
        assert (labels[idx] == 0).sum() == (labels[idx] == 1).sum() == 10

    def test_upsample_balances_to_majority(self):
        labels = [0] * 90 + [1] * 10
        idx = prep.resample_balanced(labels, "up", seed=0)
        labels = np.asarray(labels)
        assert (labels[idx] == 0).sum() == (labels[idx] == 1).sum() == 90
