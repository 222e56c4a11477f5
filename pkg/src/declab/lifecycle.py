"""Model freshness and safety: drift-triggered retraining, champion /
challenger canary gates, promotion and rollback lineage, and deduplicated
alerting. Registry updates are serialized per use case.
"""
from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import errors, models, prep
from .offeval import PolicyEvaluation

RETRAIN_MAX_AGE_DAYS = 7.0
LOSS_GATE_TOLERANCE = 1.02
ALERT_DEDUP_SECONDS = 3600.0
MISSING_FEATURE_ALERT_RATE = 0.2


@dataclass(frozen=True)
class Manifest:
    """Everything needed to rebuild an artifact bit-identically."""

    id: str
    use_case: str
    dataset_hash: str
    model_kind: str
    hyperparams: models.Hyperparams
    seed: int
    policy_version: str
    policy_params: dict
    parent_id: Optional[str]
    created_at: float
    artifact_text: str  # serialized trained artifact
    plan_fingerprint: str
    plan: Optional[prep.PreprocessPlan] = None

    @staticmethod
    def build(use_case: str, dataset_hash: str, artifact: models.ModelArtifact,
              policy_version: str, policy_params: dict,
              parent_id: Optional[str], created_at: float,
              plan_fingerprint: str = "",
              plan: Optional[prep.PreprocessPlan] = None) -> "Manifest":
        text = models.serialize(artifact)
        ident = hashlib.sha256(
            f"{use_case}|{dataset_hash}|{text}|{policy_version}".encode()
        ).hexdigest()[:20]
        return Manifest(
            id=ident, use_case=use_case, dataset_hash=dataset_hash,
            model_kind=artifact.kind, hyperparams=artifact.hyperparams,
            seed=artifact.seed, policy_version=policy_version,
            policy_params=dict(policy_params), parent_id=parent_id,
            created_at=created_at, artifact_text=text,
            plan_fingerprint=plan_fingerprint, plan=plan)

    def artifact(self) -> models.ModelArtifact:
        return models.deserialize(self.artifact_text)


@dataclass(frozen=True)
class CanaryReport:
    champion_loss: float
    challenger_loss: float
    loss_gate_passed: bool
    metric: str
    champion_estimate: float
    challenger_interval: tuple[float, float]
    metric_gate_passed: bool
    verdict: str  # "promote" | "reject"
    reasons: tuple[str, ...]


@dataclass(frozen=True)
class Alert:
    id: str
    severity: str
    kind: str  # drift | data-missing | output-anomaly | canary-reject
    evidence: dict
    raised_at: float


@dataclass(frozen=True)
class FreshnessDecision:
    action: str  # "none" | "retrain"
    report: prep.DriftReport
    reasons: tuple[str, ...]


def evaluate_freshness(reference: dict[str, np.ndarray],
                       current: dict[str, np.ndarray],
                       age_days: float,
                       max_age_days: float = RETRAIN_MAX_AGE_DAYS,
                       psi_threshold: float = prep.PSI_ALERT_THRESHOLD,
                       ) -> FreshnessDecision:
    """Retrain when feature drift crosses the PSI threshold or the model
    exceeds the retraining schedule."""
    report = prep.drift_report(reference, current, threshold=psi_threshold)
    reasons = []
    if report.overall_max_psi > psi_threshold:
        reasons.append("drift")
    if age_days > max_age_days:
        reasons.append("stale")
    action = "retrain" if reasons else "none"
    return FreshnessDecision(action=action, report=report,
                             reasons=tuple(reasons))


def canary(champion_loss: float, challenger_loss: float,
           champion_eval: PolicyEvaluation,
           challenger_eval: PolicyEvaluation,
           metric: str) -> CanaryReport:
    """Two-gate comparison before promotion.

    Gate 1: challenger offline loss within 2% of the champion's.
    Gate 2: the challenger's counterfactual product-metric lower CI bound
    must not regress below the champion point estimate by more than one
    CI half-width.
    """
    loss_ok = challenger_loss <= champion_loss * LOSS_GATE_TOLERANCE
    champ_point = champion_eval.estimates[metric]
    lo, hi = challenger_eval.intervals[metric]
    half_width = (hi - lo) / 2.0
    metric_ok = lo >= champ_point - half_width
    reasons = []
    if not loss_ok:
        reasons.append(
            f"gate1: challenger loss {challenger_loss:.6g} exceeds "
            f"champion {champion_loss:.6g} x {LOSS_GATE_TOLERANCE}")
    if not metric_ok:
        reasons.append(
            f"gate2: challenger {metric} lower bound {lo:.6g} regresses "
            f"below champion {champ_point:.6g} minus half-width")
    return CanaryReport(
        champion_loss=champion_loss, challenger_loss=challenger_loss,
        loss_gate_passed=loss_ok, metric=metric,
        champion_estimate=champ_point, challenger_interval=(lo, hi),
        metric_gate_passed=metric_ok,
        verdict="promote" if loss_ok and metric_ok else "reject",
        reasons=tuple(reasons))


@dataclass(frozen=True)
class ChampionRecord:
    manifest: Manifest
    promoted_at: float
    parent_manifest_id: Optional[str]


class Registry:
    """Champion lineage per use case; promotions swap atomically."""

    def __init__(self):
        self._lock = threading.Lock()
        self._head: dict[str, ChampionRecord] = {}
        self._history: dict[str, list[ChampionRecord]] = {}
        self._manifests: dict[str, Manifest] = {}

    def head(self, use_case: str) -> Optional[ChampionRecord]:
        return self._head.get(use_case)

    def manifest(self, manifest_id: str) -> Optional[Manifest]:
        return self._manifests.get(manifest_id)

    def history(self, use_case: str) -> list[ChampionRecord]:
        return list(self._history.get(use_case, []))

    def promote(self, manifest: Manifest, now: float) -> ChampionRecord:
        with self._lock:
            prev = self._head.get(manifest.use_case)
            record = ChampionRecord(
                manifest=manifest, promoted_at=now,
                parent_manifest_id=prev.manifest.id if prev else None)
            self._head[manifest.use_case] = record
            self._history.setdefault(manifest.use_case, []).append(record)
            self._manifests[manifest.id] = manifest
            return record

    def rollback(self, use_case: str, now: float) -> ChampionRecord:
        with self._lock:
            head = self._head.get(use_case)
            if head is None or head.parent_manifest_id is None:
                raise errors.NoParent(use_case)
            parent = self._manifests[head.parent_manifest_id]
            record = ChampionRecord(
                manifest=parent, promoted_at=now,
                parent_manifest_id=parent.parent_id)
            self._head[use_case] = record
            self._history.setdefault(use_case, []).append(record)
            return record


class AlertLog:
    """Persisted alerts with (kind, evidence) dedup inside a time window."""

    def __init__(self, dedup_seconds: float = ALERT_DEDUP_SECONDS):
        self.dedup_seconds = dedup_seconds
        self._alerts: list[Alert] = []
        self._lock = threading.Lock()

    def raise_alert(self, kind: str, evidence: dict, now: float,
                    severity: str = "warning") -> str:
        key = json.dumps({"kind": kind, "evidence": evidence}, sort_keys=True,
                         default=str)
        with self._lock:
            for alert in reversed(self._alerts):
                existing = json.dumps({"kind": alert.kind,
                                       "evidence": alert.evidence},
                                      sort_keys=True, default=str)
                if existing == key and now - alert.raised_at < self.dedup_seconds:
                    return alert.id
            alert = Alert(id=uuid.uuid4().hex[:12], severity=severity,
                          kind=kind, evidence=evidence, raised_at=now)
            self._alerts.append(alert)
            return alert.id

    def alerts(self) -> list[Alert]:
        return list(self._alerts)


def promote_or_rollback(report: CanaryReport, registry: Registry,
                        challenger: Manifest, alerts: AlertLog,
                        now: float) -> ChampionRecord:
    """Apply a canary verdict: promote swaps the champion pointer and keeps
    the previous one for rollback; reject leaves the champion in place and
    raises a canary-reject alert."""
    if report.verdict == "promote":
        return registry.promote(challenger, now)
    alerts.raise_alert("canary-reject",
                       {"manifest": challenger.id,
                        "reasons": list(report.reasons)}, now)
    head = registry.head(challenger.use_case)
    if head is None:
        raise errors.NoChampion(challenger.use_case)
    return head


def train_from_manifest(manifest: Manifest, X: np.ndarray,
                        y: np.ndarray) -> models.ModelArtifact:
    """Re-run training exactly as recorded; the result must serialize to
    the identical bytes (checked by verify_reproducibility)."""
    return models.train(manifest.model_kind, X, y, manifest.hyperparams,
                        manifest.seed)


def verify_reproducibility(manifest: Manifest, X: np.ndarray,
                           y: np.ndarray) -> None:
    rebuilt = train_from_manifest(manifest, X, y)
    if models.serialize(rebuilt) != manifest.artifact_text:
        raise errors.ManifestUnreproducible(manifest.id)


def missing_feature_alert(missing_rate: float, n_decisions: int,
                          alerts: AlertLog, now: float) -> Optional[str]:
    if n_decisions >= 1000 and missing_rate > MISSING_FEATURE_ALERT_RATE:
        return alerts.raise_alert(
            "data-missing",
            {"missing_rate": round(missing_rate, 4),
             "n_decisions": n_decisions}, now)
    return None
