"""Multi-objective reward tuning on the 2-metric chain MDP.

Uniform-random behavior data goes through FQI once per scalarization; the
scalarizations come from a lattice warm start plus a GP over Chebyshev
weights. The output is a Pareto front of (engagement, thrift) trade-offs,
each entry a deployable greedy policy with FQE intervals.
"""
import numpy as np

from declab import core, eventlog, rl, simlab, tuning

env = simlab.catalog()["chain-mdp-2metric"]


def uniform_agent(s, rng):
    return env.actions[rng.randint(2)], 0.5


rows = simlab.simulate_cohort(env, uniform_agent, 100, seed=7)
examples = [eventlog.JoinedExample(
    decision_id=f"d{i}", unit_id=r.unit_id, timestamp=r.timestamp,
    features=core.FeatureVector(values=dict(r.features)), action=r.action,
    propensity=r.propensity, policy_version="sim",
    metric_values=dict(r.metrics), joined_at=r.timestamp, late=False)
    for i, r in enumerate(rows)]
examples.sort(key=lambda e: (e.unit_id, e.timestamp))
transitions = rl.build_transitions(
    examples, state_fn=lambda ex: ex.features.get("state"))
print(f"{len(transitions)} logged transitions from 100 episodes")

front = tuning.tune_reward(transitions, env.metrics, budget=24, seed=7)
print(f"{len(front.all_trials)} trials -> {len(front.candidates)} "
      f"nondominated candidates, hypervolume {front.hypervolume:.4f}\n")

print(f"{'w_engagement':>12} {'w_thrift':>9} {'engagement':>11} {'thrift':>8}")
for cand in front.candidates:
    w = cand.reward_weights
    est = cand.evaluation.estimates
    print(f"{w['engagement']:>12.3f} {w['thrift']:>9.3f} "
          f"{est['engagement']:>11.4f} {est['thrift']:>8.4f}")

# sanity: compare the extreme candidates against the exact optima
for metric in env.metrics:
    exact, _ = simlab.mdp_optimal_value(env, {metric: 1.0})
    best = max(c.evaluation.estimates[metric] for c in front.candidates)
    print(f"best {metric}: tuned {best:.4f} vs exact optimum "
          f"{exact[metric]:.4f}")
