"""Drift detection and recovery on the bandit-drift preset.

The environment shifts its context distribution (and the profitable region
with it) at t=500. A model trained pre-drift keeps serving confidently and
quietly loses most of its edge; the PSI check catches the shift, one
retrain restores the regret to its pre-drift level.
"""
import numpy as np

from declab import lifecycle, models, simlab

env = simlab.catalog()["bandit-drift"]
HP = models.Hyperparams(learning_rate=0.1, rounds=60, depth=3, leaf_min=20)
THETA = 0.45  # the keep arm pays a constant 0.45


def cohort(t, seed, n=4000):
    def uniform(x, rng):
        return env.actions[rng.randint(2)], 0.5
    return simlab.simulate_cohort(env, uniform, n, t=t, seed=seed)


def train(rows, seed):
    send = [r for r in rows if r.action == "send"]
    X = np.array([[r.features["x0"], r.features["x1"]] for r in send])
    y = np.array([r.metrics["success"] for r in send])
    return models.train("gbdt", X, y, HP, seed)


def columns(rows):
    return {"x0": np.array([r.features["x0"] for r in rows]),
            "x1": np.array([r.features["x1"] for r in rows])}


def regret(model, t):
    def dist(X):
        D = np.zeros((len(X), 2))
        D[:, 1] = models.predict(model, X) >= THETA
        D[:, 0] = 1.0 - D[:, 1]
        return D
    opt = simlab.oracle_optimal(env, t=t)["success"]
    got = simlab.oracle_value_vectorized(env, dist, t=t)["success"]
    return opt - got


# day 0: train and baseline
pre_rows = cohort(t=0.0, seed=11)
champion = train(pre_rows, seed=11)
reference = columns(pre_rows)
r_pre = regret(champion, t=0.0)
print(f"pre-drift regret: {r_pre:.4f}")

# after the shift: the freshness check fires on PSI
post_rows = cohort(t=600.0, seed=12)
decision = lifecycle.evaluate_freshness(reference, columns(post_rows),
                                        age_days=1.0)
psi = decision.report.per_column_psi
print(f"freshness: action={decision.action} reasons={decision.reasons} "
      f"PSI(x0)={psi['x0']:.2f} PSI(x1)={psi['x1']:.3f}")
print(f"stale-champion regret post-drift: {regret(champion, 600.0):.4f}")

# one retrain on fresh data recovers; the next check is quiet
fresh_rows = cohort(t=600.0, seed=13)
challenger = train(fresh_rows, seed=13)
second = lifecycle.evaluate_freshness(columns(fresh_rows),
                                      columns(cohort(t=600.0, seed=14)),
                                      age_days=1.0)
r_new = regret(challenger, t=600.0)
print(f"retrained regret: {r_new:.4f} "
      f"(recovered to {r_new / r_pre:.0%} of pre-drift level); "
      f"next check: {second.action}")
