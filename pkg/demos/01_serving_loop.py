"""Onboard a use case, warm the log, train a champion, and serve decisions.

Runs entirely in-process against a temporary data directory; the same flow
works over HTTP via `declab serve` plus the mirror CLI commands.
"""
import tempfile

import numpy as np

from declab import core, eventlog
from declab.platform import Platform

SPEC = {
    "id": "promo-email",
    "actions": ["keep", "send"],
    "decision_kind": "binary",
    "metrics": [{"name": "success"}],
    "features": [{"name": "x0", "type": "numeric"},
                 {"name": "x1", "type": "numeric"}],
}

workdir = tempfile.mkdtemp(prefix="declab-demo-")
platform = Platform(workdir)

# --- onboarding ------------------------------------------------------------
out = platform.onboard(SPEC)
print(f"onboarded {out['id']!r}; platform also recommends features like "
      f"{[f['name'] for f in out['recommended_features'][:2]]}")

# --- historical traffic ----------------------------------------------------
# Before the first model exists there is usually legacy traffic; replaying
# it through the predict/observe pair gives the platform its first dataset.
rng = np.random.RandomState(0)
for i in range(800):
    x0, x1 = rng.standard_normal(2)
    action = "send" if rng.random_sample() < 0.5 else "keep"
    did = f"legacy-{i:05d}"
    platform.log.log_prediction(eventlog.PredictionEvent(
        decision_id=did, use_case="promo-email", unit_id=f"u{i:05d}",
        timestamp=1000.0 + i,
        features=core.FeatureVector(values={"x0": x0, "x1": x1}),
        action=action, propensity=0.5, policy_version="legacy"))
    p = float(np.clip(0.15 * x0 + 0.2, 0.05, 0.95)) if action == "send" \
        else 0.25
    platform.log.log_observation("promo-email", eventlog.ObservationEvent(
        decision_id=did, timestamp=1000.0 + i + 30.0,
        metric_values={"success": float(rng.random_sample() < p)}))

# --- first training job ----------------------------------------------------
job = platform.submit_job("promo-email", "train",
                          {"model_kind": "logistic", "min_rows": 500,
                           "seed": 0, "now": 10_000.0, "theta": 0.35},
                          synchronous=True)
assert job.status == "done", job.error
print(f"trained champion {job.result['manifest_id']} "
      f"on {job.result['n_rows']} joined rows "
      f"(dataset {job.result['dataset_hash'][:10]}...)")

# --- live serving ----------------------------------------------------------
for seed, x0 in enumerate((2.0, -2.0, 0.3)):
    d = platform.decide("promo-email", unit_id=f"live-{seed}",
                        raw_features={"x0": x0, "x1": 0.0}, seed=seed,
                        now=20_000.0 + seed)
    print(f"x0={x0:+.1f} -> action={d['action']:<4} "
          f"propensity={d['propensity']:.3f} ({d['policy_version']})")
    platform.observe("promo-email", d["decision_id"], {"success": 1.0},
                     now=20_100.0 + seed)

health = platform.health("promo-email", now=30_000.0)
print(f"health: champion={health['champion']}, "
      f"counters={health['counters']}, "
      f"max PSI={health['drift']['overall_max_psi']:.4f}")
print(f"events persisted under {workdir}/promo-email/")
