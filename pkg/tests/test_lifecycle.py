import numpy as np
import pytest

from declab import errors, lifecycle, models
from declab.lifecycle import AlertLog, Manifest, Registry
from declab.offeval import PolicyEvaluation


def _artifact(seed=0):
    rng = np.random.RandomState(seed)
    X = rng.standard_normal((200, 3))
    y = (X[:, 0] > 0).astype(float)
    hp = models.Hyperparams(learning_rate=0.1, epochs=100)
    return models.train("logistic", X, y, hp, seed), X, y


def _manifest(seed=0, parent=None, use_case="uc"):
    artifact, X, y = _artifact(seed)
    m = Manifest.build(use_case=use_case, dataset_hash=f"ds{seed}",
                       artifact=artifact, policy_version=f"v{seed}",
                       policy_params={"theta": 0.5}, parent_id=parent,
                       created_at=1000.0 + seed)
    return m, X, y


def _evaluation(point, half_width, metric="conversion"):
    return PolicyEvaluation(
        estimator="dr", estimates={metric: point},
        intervals={metric: (point - half_width, point + half_width)},
        n=1000, effective_sample_size=900.0, max_weight=3.0,
        clipped_fraction=0.0)


class TestFreshness:
    def _features(self, shift=0.0, seed=0, n=2000):
        rng = np.random.RandomState(seed)
        return {"x0": rng.standard_normal(n) + shift,
                "x1": rng.standard_normal(n)}

    def test_no_drift_no_retrain(self):
        d = lifecycle.evaluate_freshness(self._features(), self._features(seed=1),
                                         age_days=1.0)
        assert d.action == "none" and d.reasons == ()

    def test_drift_triggers_retrain(self):
        d = lifecycle.evaluate_freshness(self._features(),
                                         self._features(shift=2.0, seed=1),
                                         age_days=1.0)
        assert d.action == "retrain"
        assert "drift" in d.reasons
        assert d.report.overall_max_psi > 0.2
        assert max(d.report.per_column_psi,
                   key=d.report.per_column_psi.get) == "x0"

    def test_age_triggers_retrain_without_drift(self):
        d = lifecycle.evaluate_freshness(self._features(), self._features(seed=1),
                                         age_days=8.0)
        assert d.action == "retrain" and d.reasons == ("stale",)

    def test_both_reasons_recorded(self):
        d = lifecycle.evaluate_freshness(self._features(),
                                         self._features(shift=2.0, seed=1),
                                         age_days=10.0)
        assert set(d.reasons) == {"drift", "stale"}


class TestCanary:
    def test_promote_when_both_gates_pass(self):
        report = lifecycle.canary(
            champion_loss=0.50, challenger_loss=0.49,
            champion_eval=_evaluation(0.30, 0.02),
            challenger_eval=_evaluation(0.32, 0.02), metric="conversion")
        assert report.verdict == "promote" and report.reasons == ()

    def test_loss_gate_boundary_is_two_percent(self):
        ok = lifecycle.canary(0.50, 0.50 * 1.02, _evaluation(0.3, 0.02),
                              _evaluation(0.3, 0.02), "conversion")
        assert ok.loss_gate_passed
        bad = lifecycle.canary(0.50, 0.50 * 1.02 + 1e-9,
                               _evaluation(0.3, 0.02),
                               _evaluation(0.3, 0.02), "conversion")
        assert not bad.loss_gate_passed and bad.verdict == "reject"
        assert any("gate1" in r for r in bad.reasons)

    def test_metric_gate_allows_one_half_width_of_slack(self):
        champ = _evaluation(0.30, 0.02)
        # challenger CI (0.26, 0.30): lower bound 0.26 < 0.30 - 0.02 = 0.28
        bad = lifecycle.canary(0.5, 0.5, champ, _evaluation(0.28, 0.02),
                               "conversion")
        assert not bad.metric_gate_passed
        assert any("gate2" in r for r in bad.reasons)
        # challenger CI (0.28, 0.32): lower bound exactly at the slack line
        ok = lifecycle.canary(0.5, 0.5, champ, _evaluation(0.30, 0.02),
                              "conversion")
        assert ok.metric_gate_passed and ok.verdict == "promote"


class TestRegistry:
    def test_promote_and_rollback_lineage(self):
        reg = Registry()
        m1, _, _ = _manifest(seed=1)
        m2, _, _ = _manifest(seed=2)
        reg.promote(m1, now=10.0)
        reg.promote(m2, now=20.0)
        assert reg.head("uc").manifest.id == m2.id
        assert reg.head("uc").parent_manifest_id == m1.id
        back = reg.rollback("uc", now=30.0)
        assert back.manifest.id == m1.id
        assert [r.manifest.id for r in reg.history("uc")] \
            == [m1.id, m2.id, m1.id]

    def test_rollback_without_parent(self):
        reg = Registry()
        m1, _, _ = _manifest(seed=1)
        reg.promote(m1, now=10.0)
        with pytest.raises(errors.NoParent):
            reg.rollback("uc", now=20.0)
        with pytest.raises(errors.NoParent):
            reg.rollback("never-promoted", now=20.0)

    def test_use_cases_are_independent(self):
        reg = Registry()
        ma, _, _ = _manifest(seed=1, use_case="a")
        mb, _, _ = _manifest(seed=2, use_case="b")
        reg.promote(ma, now=1.0)
        reg.promote(mb, now=2.0)
        assert reg.head("a").manifest.id == ma.id
        assert reg.head("b").manifest.id == mb.id


class TestAlerts:
    def test_dedup_within_window(self):
        log = AlertLog()
        first = log.raise_alert("drift", {"col": "x0"}, now=0.0)
        again = log.raise_alert("drift", {"col": "x0"}, now=100.0)
        assert first == again
        assert len(log.alerts()) == 1

    def test_reraised_after_window(self):
        log = AlertLog(dedup_seconds=3600.0)
        first = log.raise_alert("drift", {"col": "x0"}, now=0.0)
        later = log.raise_alert("drift", {"col": "x0"}, now=3601.0)
        assert first != later and len(log.alerts()) == 2

    def test_different_evidence_not_deduped(self):
        log = AlertLog()
        a = log.raise_alert("drift", {"col": "x0"}, now=0.0)
        b = log.raise_alert("drift", {"col": "x1"}, now=0.0)
        assert a != b

    def test_missing_feature_alert_thresholds(self):
        log = AlertLog()
        assert lifecycle.missing_feature_alert(0.5, 500, log, 0.0) is None
        assert lifecycle.missing_feature_alert(0.1, 5000, log, 0.0) is None
        assert lifecycle.missing_feature_alert(0.25, 5000, log, 0.0)


class TestPromoteOrRollback:
    def test_reject_keeps_champion_and_alerts(self):
        reg, log = Registry(), AlertLog()
        champ, _, _ = _manifest(seed=1)
        chall, _, _ = _manifest(seed=2)
        reg.promote(champ, now=1.0)
        report = lifecycle.canary(0.5, 0.9, _evaluation(0.3, 0.02),
                                  _evaluation(0.3, 0.02), "conversion")
        head = lifecycle.promote_or_rollback(report, reg, chall, log, now=2.0)
        assert head.manifest.id == champ.id
        assert log.alerts()[0].kind == "canary-reject"

    def test_promote_swaps_head(self):
        reg, log = Registry(), AlertLog()
        champ, _, _ = _manifest(seed=1)
        chall, _, _ = _manifest(seed=2)
        reg.promote(champ, now=1.0)
        report = lifecycle.canary(0.5, 0.49, _evaluation(0.3, 0.02),
                                  _evaluation(0.31, 0.02), "conversion")
        head = lifecycle.promote_or_rollback(report, reg, chall, log, now=2.0)
        assert head.manifest.id == chall.id
        assert log.alerts() == []

    def test_reject_with_no_champion(self):
        reg, log = Registry(), AlertLog()
        chall, _, _ = _manifest(seed=2)
        report = lifecycle.canary(0.5, 0.9, _evaluation(0.3, 0.02),
                                  _evaluation(0.3, 0.02), "conversion")
        with pytest.raises(errors.NoChampion):
            lifecycle.promote_or_rollback(report, reg, chall, log, now=2.0)


class TestReproducibility:
    def test_manifest_rebuilds_byte_identically(self):
        m, X, y = _manifest(seed=4)
        lifecycle.verify_reproducibility(m, X, y)  # should not raise

    def test_tampered_data_detected(self):
        m, X, y = _manifest(seed=4)
        with pytest.raises(errors.ManifestUnreproducible):
            lifecycle.verify_reproducibility(m, X, 1.0 - y)

    def test_manifest_id_depends_on_inputs(self):
        m1, _, _ = _manifest(seed=1)
        m2, _, _ = _manifest(seed=2)
        assert m1.id != m2.id
        assert m1.artifact().kind == "logistic"
