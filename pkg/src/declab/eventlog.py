"""Predict-observe data custody.

Prediction and observation events are appended to per-use-case durable logs
(newline-delimited JSON), window-joined into labeled examples, and assembled
into retention-respecting dataset snapshots with stable content hashes.
"""
from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import errors
from .core import MISSING, FeatureVector, UseCaseSpec, ValidatedSpec

DEFAULT_MIN_ROWS = 500


@dataclass(frozen=True)
class PredictionEvent:
    decision_id: str
    use_case: str
    unit_id: str
    timestamp: float
    features: FeatureVector
    action: str
    propensity: float
    policy_version: str
    idempotency_key: Optional[str] = None


@dataclass(frozen=True)
class ObservationEvent:
    decision_id: str
    timestamp: float
    metric_values: dict[str, float]

    def __post_init__(self):
        object.__setattr__(self, "metric_values", dict(self.metric_values))


@dataclass(frozen=True)
class JoinedExample:
    decision_id: str
    unit_id: str
    timestamp: float
    features: FeatureVector
    action: str
    propensity: float
    policy_version: str
    metric_values: dict[str, float]
    joined_at: float
    late: bool  # True when metrics were defaulted on join-window timeout


@dataclass(frozen=True)
class DatasetSnapshot:
    use_case: str
    schema_version: int
    rows: tuple[JoinedExample, ...]
    content_hash: str
    created_at: float


@dataclass
class JoinCounters:
    orphans: int = 0       # observations with no matching prediction
    late: int = 0          # observations past the join window
    timeouts: int = 0      # predictions joined with defaulted metrics
    duplicates: int = 0    # repeat observations for a decision


def _fv_to_json(fv: FeatureVector) -> dict:
    return {k: (None if v is MISSING else v) for k, v in fv.values.items()}


def _fv_from_json(d: dict) -> FeatureVector:
    return FeatureVector(
        values={k: (MISSING if v is None else v) for k, v in d.items()})


def _row_to_json(row: JoinedExample) -> dict:
    return {
        "decision_id": row.decision_id,
        "unit_id": row.unit_id,
        "timestamp": row.timestamp,
        "features": _fv_to_json(row.features),
        "action": row.action,
        "propensity": row.propensity,
        "policy_version": row.policy_version,
        "metric_values": row.metric_values,
        "joined_at": row.joined_at,
        "late": row.late,
    }


class EventLog:
    """Per-use-case append-only prediction/observation logs.

    Appends are serialized per use case; joins read a consistent prefix.
    When ``root`` is given, every event is appended to an NDJSON file and
    replayed on construction, so the log survives restarts.
    """

    def __init__(self, root: Optional[Path | str] = None):
        self.root = Path(root) if root is not None else None
        self._specs: dict[str, UseCaseSpec] = {}
        self._predictions: dict[str, list[PredictionEvent]] = {}
        self._observations: dict[str, list[ObservationEvent]] = {}
        self._by_idem: dict[str, dict[str, str]] = {}
        self._by_decision: dict[str, set[str]] = {}
        self._timeout_defaults: dict[str, dict[str, float]] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._counters: dict[str, JoinCounters] = {}
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._replay()

    # -- onboarding ------------------------------------------------------

    def register(self, validated: ValidatedSpec,
                 timeout_defaults: Optional[dict[str, float]] = None) -> None:
        spec = validated.spec
        self._specs[spec.id] = spec
        self._predictions.setdefault(spec.id, [])
        self._observations.setdefault(spec.id, [])
        self._by_idem.setdefault(spec.id, {})
        self._by_decision.setdefault(spec.id, set())
        self._locks.setdefault(spec.id, threading.Lock())
        self._counters.setdefault(spec.id, JoinCounters())
        defaults = {name: 0.0 for name in spec.metric_names}
        defaults.update(timeout_defaults or {})
        self._timeout_defaults[spec.id] = defaults

    def spec(self, use_case: str) -> UseCaseSpec:
        if use_case not in self._specs:
            raise errors.UnknownUseCase(use_case)
        return self._specs[use_case]

    def counters(self, use_case: str) -> JoinCounters:
        self.spec(use_case)
        return self._counters[use_case]

    # -- appends ---------------------------------------------------------

    def log_prediction(self, ev: PredictionEvent) -> str:
        spec = self.spec(ev.use_case)
        if not (0.0 < ev.propensity <= 1.0):
            raise errors.BadPropensity(f"propensity {ev.propensity}")
        with self._locks[ev.use_case]:
            if ev.idempotency_key is not None:
                prior = self._by_idem[ev.use_case].get(ev.idempotency_key)
                if prior is not None:
                    return prior
            if ev.decision_id in self._by_decision[ev.use_case]:
                raise errors.DuplicateDecision(ev.decision_id)
            self._predictions[ev.use_case].append(ev)
            self._by_decision[ev.use_case].add(ev.decision_id)
            if ev.idempotency_key is not None:
                self._by_idem[ev.use_case][ev.idempotency_key] = ev.decision_id
            self._append_record(ev.use_case, "predictions", {
                "decision_id": ev.decision_id,
                "use_case": ev.use_case,
                "unit_id": ev.unit_id,
                "timestamp": ev.timestamp,
                "features": _fv_to_json(ev.features),
                "action": ev.action,
                "propensity": ev.propensity,
                "policy_version": ev.policy_version,
                "idempotency_key": ev.idempotency_key,
            })
        return ev.decision_id

    def log_observation(self, use_case: str, ev: ObservationEvent) -> None:
        spec = self.spec(use_case)
        unknown = set(ev.metric_values) - set(spec.metric_names)
        if unknown:
            raise errors.UnknownMetric(", ".join(sorted(unknown)))
        with self._locks[use_case]:
            self._observations[use_case].append(ev)
            self._append_record(use_case, "observations", {
                "decision_id": ev.decision_id,
                "timestamp": ev.timestamp,
                "metric_values": ev.metric_values,
            })

    # -- joins and snapshots ---------------------------------------------

    def join_events(self, use_case: str, now: float) -> list[JoinedExample]:
        """Window-join predictions with observations.

        First observation per decision wins; observations past the join
        window are dropped and counted late; timed-out predictions get
        the per-metric default and are flagged. Deterministic in
        (log contents, now, spec).
        """
        spec = self.spec(use_case)
        counters = JoinCounters()
        matched: dict[str, ObservationEvent] = {}
        known = self._by_decision[use_case]
        preds = {p.decision_id: p for p in self._predictions[use_case]}
        for obs in self._observations[use_case]:
            if obs.decision_id not in known:
                counters.orphans += 1
                continue
            pred = preds[obs.decision_id]
            if obs.timestamp - pred.timestamp > spec.join_window:
                counters.late += 1
                continue
            if obs.decision_id in matched:
                counters.duplicates += 1
                continue
            matched[obs.decision_id] = obs

        out: list[JoinedExample] = []
        defaults = self._timeout_defaults[use_case]
        for pred in self._predictions[use_case]:
            obs = matched.get(pred.decision_id)
            if obs is not None:
                values = {name: obs.metric_values.get(name, defaults[name])
                          for name in spec.metric_names}
                out.append(JoinedExample(
                    decision_id=pred.decision_id, unit_id=pred.unit_id,
                    timestamp=pred.timestamp, features=pred.features,
                    action=pred.action, propensity=pred.propensity,
                    policy_version=pred.policy_version,
                    metric_values=values, joined_at=obs.timestamp, late=False))
            elif now > pred.timestamp + spec.join_window:
                counters.timeouts += 1
                out.append(JoinedExample(
                    decision_id=pred.decision_id, unit_id=pred.unit_id,
                    timestamp=pred.timestamp, features=pred.features,
                    action=pred.action, propensity=pred.propensity,
                    policy_version=pred.policy_version,
                    metric_values=dict(defaults),
                    joined_at=pred.timestamp + spec.join_window, late=True))
        self._counters[use_case] = counters
        return out

    def build_dataset(self, use_case: str, now: float,
                      min_rows: int = DEFAULT_MIN_ROWS) -> DatasetSnapshot:
        """Assemble a snapshot of joined rows inside the retention window.

        Rows are sorted by decision_id and hashed so two calls over
        identical logs yield the same content_hash.
        """
        spec = self.spec(use_case)
        horizon = now - spec.retention_days * 86400.0
        rows = [r for r in self.join_events(use_case, now)
                if r.timestamp >= horizon]
        rows.sort(key=lambda r: r.decision_id)
        if len(rows) < min_rows:
            raise errors.InsufficientData(
                f"{len(rows)} joined rows inside retention, need {min_rows}")
        digest = hashlib.sha256()
        for row in rows:
            digest.update(json.dumps(_row_to_json(row), sort_keys=True,
                                     separators=(",", ":")).encode())
        snapshot = DatasetSnapshot(
            use_case=use_case,
            schema_version=spec.features.version,
            rows=tuple(rows),
            content_hash=digest.hexdigest(),
            created_at=now,
        )
        self._write_snapshot(snapshot)
        return snapshot

    # -- durability ------------------------------------------------------

    def _append_record(self, use_case: str, kind: str, record: dict) -> None:
        if self.root is None:
            return
        path = self.root / use_case
        path.mkdir(parents=True, exist_ok=True)
        with open(path / f"{kind}.ndjson", "a") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")

    def _write_snapshot(self, snapshot: DatasetSnapshot) -> None:
        if self.root is None:
            return
        snapdir = (self.root / snapshot.use_case / "snapshots"
                   / snapshot.content_hash[:16])
        snapdir.mkdir(parents=True, exist_ok=True)
        with open(snapdir / "rows.ndjson", "w") as f:
            for row in snapshot.rows:
                f.write(json.dumps(_row_to_json(row), sort_keys=True) + "\n")
        with open(snapdir / "manifest.json", "w") as f:
            json.dump({
                "use_case": snapshot.use_case,
                "schema_version": snapshot.schema_version,
                "content_hash": snapshot.content_hash,
                "created_at": snapshot.created_at,
                "n_rows": len(snapshot.rows),
            }, f, indent=2)

    def _replay(self) -> None:
        # Specs are registered by the caller; events replay lazily once the
        # use case is known, from the per-use-case NDJSON files.
        self._pending_replay = sorted(
            p.name for p in self.root.iterdir() if p.is_dir())

    def replay_use_case(self, validated: ValidatedSpec) -> None:
        """Register a spec and reload its durable events from disk."""
        self.register(validated)
        if self.root is None:
            return
        use_case = validated.spec.id
        path = self.root / use_case
        pred_file = path / "predictions.ndjson"
        if pred_file.exists():
            with open(pred_file) as f:
                for line in f:
                    d = json.loads(line)
                    ev = PredictionEvent(
                        decision_id=d["decision_id"], use_case=d["use_case"],
                        unit_id=d["unit_id"], timestamp=d["timestamp"],
                        features=_fv_from_json(d["features"]),
                        action=d["action"], propensity=d["propensity"],
                        policy_version=d["policy_version"],
                        idempotency_key=d.get("idempotency_key"))
                    self._predictions[use_case].append(ev)
                    self._by_decision[use_case].add(ev.decision_id)
                    if ev.idempotency_key is not None:
                        self._by_idem[use_case][ev.idempotency_key] = ev.decision_id
        obs_file = path / "observations.ndjson"
        if obs_file.exists():
            with open(obs_file) as f:
                for line in f:
                    d = json.loads(line)
                    self._observations[use_case].append(ObservationEvent(
                        decision_id=d["decision_id"],
                        timestamp=d["timestamp"],
                        metric_values=d["metric_values"]))


def new_decision_id() -> str:
    return uuid.uuid4().hex
