"""Platform orchestration: onboarding, serving, jobs, candidates, deploys.

This is the in-process core behind the HTTP gateway and the CLI. Serving
follows log-then-respond ordering so every served decision has exactly one
durable prediction event before the caller sees it.
"""
from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import (autoconf, core, errors, eventlog, hte, lifecycle, models,
               offeval, policy as policymod, prep, rl, simlab, tuning)

RECOMMENDED_BASE_FEATURES = [
    {"name": "activity_7d", "type": "numeric"},
    {"name": "tenure_days", "type": "numeric"},
    {"name": "sessions_1d", "type": "numeric"},
    {"name": "platform", "type": "categorical"},
]


@dataclass
class JobRecord:
    id: str
    use_case: str
    kind: str  # train | tune_reward | tune_policy | canary
    status: str = "queued"  # queued -> running -> done | failed
    result: Optional[dict] = None
    error: Optional[str] = None
    created_at: float = 0.0
    started_at: Optional[float] = None
    finished_at: Optional[float] = None


@dataclass
class CandidateRecord:
    id: str
    use_case: str
    source_job: str
    policy_version: str
    policy_params: dict
    estimates: dict
    intervals: dict
    manifest: lifecycle.Manifest
    reward_weights: Optional[dict] = None
    canary_verdict: Optional[str] = None


def parse_spec_document(doc: dict) -> core.UseCaseSpec:
    """Build a UseCaseSpec from the JSON onboarding document."""
    metrics = []
    for m in doc.get("metrics", []):
        metrics.append(core.ProductMetricSpec(
            name=m["name"],
            direction=core.MetricDirection(m.get("direction", "maximize")),
            timing=core.MetricTiming(m.get("timing", "immediate")),
            aggregation=core.MetricAggregation(m.get("aggregation", "mean")),
            guardrail=m.get("guardrail")))
    columns = [core.FeatureColumn(name=c["name"], type=c.get("type", "numeric"),
                                  required=bool(c.get("required", False)))
               for c in doc.get("features", [])]
    kind = core.DecisionKind(doc.get("decision_kind", "binary"))
    task_hint = core.TaskKind(doc["task_hint"]) if doc.get("task_hint") else None
    return core.UseCaseSpec(
        id=doc.get("id", ""),
        decision_space=core.DecisionSpace(
            actions=tuple(doc.get("actions", [])), kind=kind),
        metrics=tuple(metrics),
        features=core.FeatureSchema(columns=tuple(columns)),
        task_hint=task_hint,
        join_window=float(doc.get("join_window", 3600.0)),
        retention_days=float(doc.get("retention_days",
                                     core.DEFAULT_RETENTION_DAYS)),
        exploration_epsilon=float(doc.get("exploration_epsilon", 0.05)))


class Platform:
    """One platform instance over a data directory."""

    def __init__(self, data_dir: Optional[str | Path] = None):
        self.log = eventlog.EventLog(data_dir)
        self.registry = lifecycle.Registry()
        self.alerts = lifecycle.AlertLog()
        self.jobs: dict[str, JobRecord] = {}
        self.candidates: dict[str, list[CandidateRecord]] = {}
        self.audit: list[dict] = []
        self._job_lock = threading.Lock()
        self._reference_features: dict[str, dict[str, np.ndarray]] = {}

    # -- onboarding ------------------------------------------------------

    def onboard(self, doc: dict) -> dict:
        spec = parse_spec_document(doc)
        validated = core.validate_spec(spec)
        self.log.register(validated)
        return {"id": validated.spec.id,
                "recommended_features": RECOMMENDED_BASE_FEATURES}

    def describe(self, use_case: str) -> dict:
        spec = self.log.spec(use_case)
        head = self.registry.head(use_case)
        return {
            "id": spec.id,
            "actions": list(spec.decision_space.actions),
            "decision_kind": spec.decision_space.kind.value,
            "metrics": [{"name": m.name, "direction": m.direction.value,
                         "timing": m.timing.value,
                         "aggregation": m.aggregation.value}
                        for m in spec.metrics],
            "features": [{"name": c.name, "type": c.type,
                          "required": c.required}
                         for c in spec.features.columns],
            "join_window": spec.join_window,
            "retention_days": spec.retention_days,
            "exploration_epsilon": spec.exploration_epsilon,
            "champion": head.manifest.id if head else None,
            "policy_version": head.manifest.policy_version if head else None,
        }

    # -- serving ---------------------------------------------------------

    def decide(self, use_case: str, unit_id: str, raw_features: dict,
               seed: int, now: Optional[float] = None) -> dict:
        spec = self.log.spec(use_case)
        head = self.registry.head(use_case)
        if head is None:
            raise errors.NoChampion(use_case)
        now = time.time() if now is None else now
        fv = core.canonicalize(raw_features, spec.features)
        manifest = head.manifest
        pol = _policy_from_params(manifest.policy_params,
                                  manifest.policy_version)
        outputs = self._model_outputs(manifest, pol, fv)
        action, propensity = policymod.decide(pol, outputs, seed)
        decision_id = eventlog.new_decision_id()
        self.log.log_prediction(eventlog.PredictionEvent(
            decision_id=decision_id, use_case=use_case, unit_id=unit_id,
            timestamp=now, features=fv, action=action, propensity=propensity,
            policy_version=manifest.policy_version))
        return {"decision_id": decision_id, "action": action,
                "propensity": propensity,
                "policy_version": manifest.policy_version}

    def _model_outputs(self, manifest: lifecycle.Manifest,
                       pol: policymod.DecisionPolicy,
                       fv: core.FeatureVector) -> dict:
        params = manifest.policy_params
        if pol.kind == "rl-greedy":
            state = fv.get("state")
            table = params.get("q_table", {})
            key = _state_key(state)
            return {a: table.get(key, {}).get(a, 0.0) for a in pol.actions}
        x = prep.apply_plan(manifest.plan, fv)
        score = float(models.predict(manifest.artifact(), x[None, :])[0])
        accept = pol.actions[1]
        reject = pol.actions[0]
        return {reject: 0.0, accept: score}

    def observe(self, use_case: str, decision_id: str, metric_values: dict,
                now: Optional[float] = None) -> dict:
        now = time.time() if now is None else now
        self.log.log_observation(use_case, eventlog.ObservationEvent(
            decision_id=decision_id, timestamp=now,
            metric_values={k: float(v) for k, v in metric_values.items()}))
        return {"ok": True}

    # -- jobs ------------------------------------------------------------

    def submit_job(self, use_case: str, kind: str, params: dict,
                   synchronous: bool = False) -> JobRecord:
        self.log.spec(use_case)
        job = JobRecord(id=uuid.uuid4().hex[:12], use_case=use_case,
                        kind=kind, created_at=time.time())
        self.jobs[job.id] = job
        if synchronous:
            self._run_job(job, params)
        else:
            thread = threading.Thread(target=self._run_job,
                                      args=(job, params), daemon=True)
            thread.start()
        return job

    def job(self, job_id: str) -> JobRecord:
        if job_id not in self.jobs:
            raise KeyError(job_id)
        return self.jobs[job_id]

    def _run_job(self, job: JobRecord, params: dict) -> None:
        with self._job_lock:
            job.status = "running"
            job.started_at = time.time()
            try:
                if job.kind == "train":
                    job.result = self._job_train(job, params)
                elif job.kind == "tune_reward":
                    job.result = self._job_tune_reward(job, params)
                elif job.kind == "tune_policy":
                    job.result = self._job_tune_policy(job, params)
                else:
                    raise ValueError(f"unknown job kind {job.kind!r}")
                job.status = "done"
            except Exception as exc:  # surfaced via job status
                job.status = "failed"
                job.error = f"{type(exc).__name__}: {exc}"
            job.finished_at = time.time()

    def _job_train(self, job: JobRecord, params: dict) -> dict:
        use_case = job.use_case
        spec = self.log.spec(use_case)
        now = params.get("now", time.time())
        metric = params.get("label_metric", spec.metric_names[0])
        min_rows = int(params.get("min_rows", eventlog.DEFAULT_MIN_ROWS))
        snapshot = self.log.build_dataset(use_case, now, min_rows=min_rows)
        plan = prep.fit_plan(snapshot, spec.features)
        X = prep.encode_rows(plan, snapshot.rows)
        y = np.array([r.metric_values[metric] for r in snapshot.rows])
        seed = int(params.get("seed", 0))
        kind = params.get("model_kind", "gbdt")
        hp = models.Hyperparams(**params.get("hyperparams", {})) \
            if params.get("hyperparams") else autoconf.DEFAULT_SPACES[
            "gbdt" if kind == "gbdt" else "logistic"].defaults
        artifact = models.train(kind, X, y, hp, seed)
        theta = float(params.get("theta", 0.5))
        version = f"{kind}-{snapshot.content_hash[:8]}-s{seed}"
        policy_params = {"kind": "threshold", "theta": theta,
                         "actions": list(spec.decision_space.actions),
                         "epsilon": spec.exploration_epsilon}
        manifest = lifecycle.Manifest.build(
            use_case=use_case, dataset_hash=snapshot.content_hash,
            artifact=artifact, policy_version=version,
            policy_params=policy_params,
            parent_id=None, created_at=now,
            plan_fingerprint=plan.fitted_on, plan=plan)
        self._reference_features[use_case] = _numeric_columns(
            spec, snapshot.rows)
        promote = params.get("auto_promote", True)
        record = None
        if promote:
            record = self.registry.promote(manifest, now)
        return {"manifest_id": manifest.id, "policy_version": version,
                "n_rows": len(snapshot.rows),
                "dataset_hash": snapshot.content_hash,
                "promoted": record is not None}

    def _job_tune_reward(self, job: JobRecord, params: dict) -> dict:
        use_case = job.use_case
        spec = self.log.spec(use_case)
        now = params.get("now", time.time())
        budget = int(params.get("budget", 16))
        gamma = float(params.get("gamma", 0.9))
        seed = int(params.get("seed", 0))
        joined = self.log.join_events(use_case, now)
        transitions = rl.build_transitions(
            sorted(joined, key=lambda r: (r.unit_id, r.timestamp)),
            state_fn=lambda ex: ex.features.get("state"))
        front = tuning.tune_reward(
            transitions, spec.metric_names, budget=budget, seed=seed,
            gamma=gamma, exploration_epsilon=spec.exploration_epsilon)
        records = []
        for cand in front.candidates:
            q_table = {_state_key(s): dict(av)
                       for s, av in cand.q_function.table.items()}
            policy_params = {"kind": "rl-greedy",
                             "actions": list(cand.policy.actions),
                             "epsilon": cand.policy.epsilon,
                             "q_table": q_table}
            dummy = models.ModelArtifact(
                kind="linear", hyperparams=models.Hyperparams(),
                seed=seed, n_features=1, weights=np.zeros(2))
            manifest = lifecycle.Manifest.build(
                use_case=use_case, dataset_hash=f"transitions-{len(transitions)}",
                artifact=dummy, policy_version=cand.policy.version,
                policy_params=policy_params, parent_id=None, created_at=now)
            record = CandidateRecord(
                id=uuid.uuid4().hex[:12], use_case=use_case,
                source_job=job.id, policy_version=cand.policy.version,
                policy_params=policy_params,
                estimates=dict(cand.evaluation.estimates),
                intervals={m: list(v)
                           for m, v in cand.evaluation.intervals.items()},
                manifest=manifest,
                reward_weights=dict(cand.reward_weights))
            records.append(record)
        self.candidates.setdefault(use_case, []).extend(records)
        return {"n_candidates": len(records),
                "hypervolume": front.hypervolume,
                "n_trials": len(front.all_trials),
                "candidate_ids": [r.id for r in records]}

    def _job_tune_policy(self, job: JobRecord, params: dict) -> dict:
        use_case = job.use_case
        spec = self.log.spec(use_case)
        head = self.registry.head(use_case)
        if head is None:
            raise errors.NoChampion(use_case)
        now = params.get("now", time.time())
        env = simlab.catalog()[params["env"]]
        budget = int(params.get("budget", 16))
        seed = int(params.get("seed", 0))
        metric = params.get("metric", spec.metric_names[0])
        manifest = head.manifest
        joined = self.log.join_events(use_case, now)
        rows = []
        for ex in joined:
            x = prep.apply_plan(manifest.plan, ex.features)
            rows.append(offeval.LoggedBanditRow(
                x=x, action=ex.action, propensity=ex.propensity,
                rewards=dict(ex.metric_values)))
        logged = offeval.LoggedBanditDataset(
            rows=tuple(rows), actions=tuple(spec.decision_space.actions),
            metrics=spec.metric_names)
        artifact = manifest.artifact()
        plan = manifest.plan
        schema = spec.features

        def score_fn(x_env: np.ndarray) -> float:
            fv = core.canonicalize(
                {c.name: float(v) for c, v in zip(schema.columns, x_env)},
                schema)
            return float(models.predict(artifact,
                                        prep.apply_plan(plan, fv)[None, :])[0])

        champion_theta = float(manifest.policy_params.get("theta", 0.5))
        report = tuning.tune_decision_policy(
            logged, score_fn, env, champion_theta, budget=budget, seed=seed,
            metric=metric)
        version = f"threshold-{report.recommended_config:.4f}-s{seed}"
        policy_params = dict(manifest.policy_params)
        policy_params["theta"] = report.recommended_config
        challenger = lifecycle.Manifest.build(
            use_case=use_case, dataset_hash=manifest.dataset_hash,
            artifact=artifact, policy_version=version,
            policy_params=policy_params, parent_id=manifest.id,
            created_at=now, plan_fingerprint=manifest.plan_fingerprint,
            plan=plan)
        record = CandidateRecord(
            id=uuid.uuid4().hex[:12], use_case=use_case, source_job=job.id,
            policy_version=version, policy_params=policy_params,
            estimates={metric: report.offline_estimates.get(
                report.recommended_config,
                list(report.offline_estimates.values())[0]).estimates[metric]}
            if report.offline_estimates else {},
            intervals={}, manifest=challenger)
        self.candidates.setdefault(use_case, []).append(record)
        return {"recommended_theta": report.recommended_config,
                "champion_theta": champion_theta,
                "pruned": list(report.pruned),
                "online_experiments": report.online_experiments_run,
                "candidate_ids": [record.id]}

    # -- candidates and deployment ---------------------------------------

    def list_candidates(self, use_case: str) -> list[dict]:
        self.log.spec(use_case)
        records = self.candidates.get(use_case)
        if not records:
            raise errors.NoTuningRun(use_case)
        return [{
            "id": r.id, "policy_version": r.policy_version,
            "estimates": r.estimates, "intervals": r.intervals,
            "reward_weights": r.reward_weights,
            "manifest_id": r.manifest.id,
            "canary_verdict": r.canary_verdict,
            "source_job": r.source_job,
        } for r in records]

    def deploy(self, use_case: str, candidate_id: str,
               override: bool = False, reason: str = "",
               now: Optional[float] = None) -> dict:
        now = time.time() if now is None else now
        records = self.candidates.get(use_case, [])
        record = next((r for r in records if r.id == candidate_id), None)
        if record is None:
            raise errors.UnknownCandidate(candidate_id)
        head = self.registry.head(use_case)
        verdict = "promote"
        reasons: list[str] = []
        if head is not None and record.estimates:
            champ_est = head.manifest.policy_params.get("estimates", {})
            metric = next(iter(record.estimates))
            if record.intervals.get(metric) and metric in champ_est:
                lo, hi = record.intervals[metric]
                half = (hi - lo) / 2
                if lo < champ_est[metric] - half:
                    verdict = "reject"
                    reasons.append("metric regression beyond CI bound")
        record.canary_verdict = verdict
        if verdict == "reject" and not override:
            self.alerts.raise_alert(
                "canary-reject", {"candidate": candidate_id,
                                  "reasons": reasons}, now)
            raise errors.CanaryRejected("; ".join(reasons))
        if override:
            self.audit.append({"action": "override-deploy",
                               "candidate": candidate_id,
                               "reason": reason, "at": now})
        params = dict(record.manifest.policy_params)
        params["estimates"] = dict(record.estimates)
        manifest = lifecycle.Manifest(
            **{**vars(record.manifest), "policy_params": params})
        promoted = self.registry.promote(manifest, now)
        return {"champion": promoted.manifest.id,
                "policy_version": promoted.manifest.policy_version,
                "parent": promoted.parent_manifest_id}

    # -- health ----------------------------------------------------------

    def health(self, use_case: str, now: Optional[float] = None) -> dict:
        spec = self.log.spec(use_case)
        now = time.time() if now is None else now
        counters = self.log.counters(use_case)
        head = self.registry.head(use_case)
        drift = None
        reference = self._reference_features.get(use_case)
        if reference is not None:
            joined = self.log.join_events(use_case, now)
            current = _numeric_columns(spec, joined[-1000:])
            shared = {k: v for k, v in current.items()
                      if k in reference and len(v)}
            if shared:
                report = prep.drift_report(
                    {k: reference[k] for k in shared}, shared)
                drift = {"per_column_psi": report.per_column_psi,
                         "overall_max_psi": report.overall_max_psi,
                         "alert": report.alert}
        return {
            "use_case": use_case,
            "champion": head.manifest.id if head else None,
            "policy_version": head.manifest.policy_version if head else None,
            "counters": {"orphans": counters.orphans, "late": counters.late,
                         "timeouts": counters.timeouts,
                         "duplicates": counters.duplicates},
            "drift": drift,
            "alerts": [{"id": a.id, "kind": a.kind, "severity": a.severity,
                        "raised_at": a.raised_at, "evidence": a.evidence}
                       for a in self.alerts.alerts()],
        }


def _policy_from_params(params: dict, version: str) -> policymod.DecisionPolicy:
    return policymod.DecisionPolicy(
        kind=params["kind"], actions=tuple(params["actions"]),
        epsilon=float(params.get("epsilon", 0.0)),
        theta=float(params.get("theta", 0.5)),
        metric_weights=params.get("metric_weights"),
        version=version)


def _state_key(state) -> str:
    if isinstance(state, float) and state == int(state):
        return str(int(state))
    return str(state)


def _numeric_columns(spec: core.UseCaseSpec, rows) -> dict[str, np.ndarray]:
    out = {}
    for col in spec.features.columns:
        if col.type != "numeric":
            continue
        vals = [r.features.get(col.name) for r in rows]
        arr = np.array([v for v in vals if v is not core.MISSING],
                       dtype=float)
        if len(arr):
            out[col.name] = arr
    return out
