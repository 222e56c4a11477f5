"""Ground-truth synthetic environments and verification oracles.

Substitutes for live product traffic: contextual bandit, treatment-effect,
and multi-metric MDP environments with drift schedules, simulated cohorts,
Welch A/B statistics, and exact or Monte-Carlo oracle values. Everything is
deterministic under seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats as sstats

from . import errors

CATALOG_VERSION = 1


@dataclass(frozen=True)
class EnvSpec:
    name: str
    kind: str                      # "bandit" | "hte" | "mdp"
    dimension: int
    actions: tuple[str, ...]
    metrics: tuple[str, ...]
    noise: float
    params: dict
    drift_schedule: tuple[tuple[float, tuple[float, ...]], ...] = ()

    def __post_init__(self):
        if self.noise < 0:
            raise errors.BadEnv("noise must be >= 0")
        if self.kind == "mdp":
            P = np.asarray(self.params["transitions"], dtype=float)
            if np.abs(P.sum(axis=2) - 1.0).max() > 1e-9:
                raise errors.BadEnv("MDP rows must be distributions")


@dataclass(frozen=True)
class TraceRow:
    unit_id: str
    timestamp: float
    features: dict[str, float]
    action: str
    propensity: float
    metrics: dict[str, float]


@dataclass(frozen=True)
class ABTestResult:
    arm_stats: dict[str, dict[str, tuple[int, float, float]]]  # arm -> metric -> (n, mean, var)
    t_statistics: dict[str, float]
    p_values: dict[str, float]
    significant: bool
    primary_metric: str


# An agent maps a context (vector for bandit/hte, state id for mdp) to a
# chosen action and its propensity, using the supplied rng for exploration.
Agent = Callable[[object, np.random.RandomState], tuple[str, float]]
# A distribution policy maps a context to an action distribution.
DistPolicy = Callable[[object], Mapping[str, float]]


# --- feature and mean models ---------------------------------------------

def feature_shift(env: EnvSpec, t: float) -> np.ndarray:
    """Cumulative feature-mean shift from the drift schedule at sim time t."""
    shift = np.zeros(env.dimension)
    for when, delta in env.drift_schedule:
        if t >= when:
            shift += np.asarray(delta, dtype=float)
    return shift


def _eval_form(form: dict, X: np.ndarray, env: EnvSpec, t: float) -> np.ndarray:
    """Evaluate a named mean-function form over contexts X (n, d)."""
    kind = form["type"]
    if kind == "const":
        return np.full(len(X), float(form["value"]))
    if kind == "linear":
        w = np.asarray(form["weights"], dtype=float)
        return X @ w + float(form.get("intercept", 0.0))
    if kind == "step":
        j = int(form["feature"])
        boundary = float(form.get("boundary", 0.0))
        if form.get("boundary_tracks_drift"):
            boundary += feature_shift(env, t)[j]
        return np.where(X[:, j] > boundary,
                        float(form["high"]), float(form["low"]))
    if kind == "signflip":
        j = int(form["feature"])
        return float(form["amplitude"]) * np.sign(X[:, j])
    raise errors.BadEnv(f"unknown mean form {kind!r}")


def arm_means(env: EnvSpec, X: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Expected outcomes, shape (n, n_actions, n_metrics)."""
    X = np.atleast_2d(X)
    out = np.zeros((len(X), len(env.actions), len(env.metrics)))
    if env.kind == "bandit":
        means = env.params["arm_means"]
        for i, action in enumerate(env.actions):
            for j, metric in enumerate(env.metrics):
                out[:, i, j] = _eval_form(means[action][metric], X, env, t)
        return out
    if env.kind == "hte":
        treatment = env.params["treatment_action"]
        for j, metric in enumerate(env.metrics):
            base = _eval_form(env.params["baseline"][metric], X, env, t)
            tau = _eval_form(env.params["uplift"][metric], X, env, t)
            for i, action in enumerate(env.actions):
                out[:, i, j] = base + (tau if action == treatment else 0.0)
        return out
    raise errors.BadEnv("arm_means applies to bandit/hte environments")


# --- cohort simulation ----------------------------------------------------

def simulate_cohort(env: EnvSpec, agent: Agent, n: int, t: float = 0.0,
                    seed: int = 0, unit_prefix: str = "u") -> list[TraceRow]:
    """Simulate n units (bandit/hte) or n episodes (mdp) at sim time t."""
    if n < 1:
        raise errors.BadEnv("n must be >= 1")
    rng = np.random.RandomState(seed)
    if env.kind in ("bandit", "hte"):
        X = rng.standard_normal((n, env.dimension)) + feature_shift(env, t)
        rows = []
        binary = bool(env.params.get("binary_outcomes"))
        means = arm_means(env, X, t)
        a_index = {a: i for i, a in enumerate(env.actions)}
        for i in range(n):
            action, prop = agent(X[i], rng)
            mu = means[i, a_index[action], :]
            if binary:
                outcome = (rng.random_sample(len(mu))
                           < np.clip(mu, 0, 1)).astype(float)
            else:
                outcome = mu + env.noise * rng.standard_normal(len(mu))
            rows.append(TraceRow(
                unit_id=f"{unit_prefix}{i:06d}", timestamp=t,
                features={f"x{j}": float(X[i, j])
                          for j in range(env.dimension)},
                action=action, propensity=prop,
                metrics=dict(zip(env.metrics, outcome))))
        return rows
    if env.kind == "mdp":
        P = np.asarray(env.params["transitions"], dtype=float)
        R = {m: np.asarray(env.params["rewards"][m], dtype=float)
             for m in env.metrics}
        start = np.asarray(env.params["start"], dtype=float)
        horizon = int(env.params["horizon"])
        a_index = {a: i for i, a in enumerate(env.actions)}
        n_states = P.shape[0]
        rows = []
        for ep in range(n):
            s = rng.choice(n_states, p=start)
            for step in range(horizon):
                action, prop = agent(s, rng)
                ai = a_index[action]
                outcome = {m: float(R[m][s, ai]) for m in env.metrics}
                if env.noise > 0:
                    for m in outcome:
                        outcome[m] += env.noise * rng.standard_normal()
                rows.append(TraceRow(
                    unit_id=f"{unit_prefix}{ep:06d}",
                    timestamp=t + step,
                    features={"state": float(s)},
                    action=action, propensity=prop, metrics=outcome))
                s = rng.choice(n_states, p=P[s, ai])
        return rows
    raise errors.BadEnv(env.kind)


# --- A/B statistics -------------------------------------------------------

def run_ab_test(env: EnvSpec, agent_a: Agent, agent_b: Agent, n: int,
                seed: int, t: float = 0.0) -> ABTestResult:
    """Welch unequal-variance t-test per metric over two simulated arms."""
    if n < 30:
        raise errors.TooSmallArms(f"need n >= 30 per arm, got {n}")
    rows_a = simulate_cohort(env, agent_a, n, t=t, seed=seed * 2 + 1,
                             unit_prefix="a")
    rows_b = simulate_cohort(env, agent_b, n, t=t, seed=seed * 2 + 2,
                             unit_prefix="b")
    arm_stats: dict[str, dict[str, tuple[int, float, float]]] = {
        "A": {}, "B": {}}
    t_stats, p_values = {}, {}
    for metric in env.metrics:
        a = np.array([r.metrics[metric] for r in rows_a])
        b = np.array([r.metrics[metric] for r in rows_b])
        arm_stats["A"][metric] = (len(a), float(a.mean()), float(a.var(ddof=1)))
        arm_stats["B"][metric] = (len(b), float(b.mean()), float(b.var(ddof=1)))
        if a.var(ddof=1) == 0 and b.var(ddof=1) == 0:
            tt, p = 0.0, 1.0
            if a.mean() != b.mean():
                tt, p = np.inf, 0.0
        else:
            tt, p = sstats.ttest_ind(a, b, equal_var=False)
        t_stats[metric] = float(tt)
        p_values[metric] = float(p)
    primary = env.metrics[0]
    return ABTestResult(arm_stats=arm_stats, t_statistics=t_stats,
                        p_values=p_values,
                        significant=p_values[primary] < 0.05,
                        primary_metric=primary)


# --- oracles --------------------------------------------------------------

def oracle_value(env: EnvSpec, policy: DistPolicy, t: float = 0.0,
                 n_samples: int = 200_000, seed: int = 0,
                 gamma: Optional[float] = None) -> dict[str, float]:
    """Per-metric expected value of a policy.

    bandit/hte: Monte-Carlo over the context distribution (labeled
    near-exact at the default sample size). mdp: exact finite-horizon
    discounted value by backward induction.
    """
    if env.kind in ("bandit", "hte"):
        rng = np.random.RandomState(seed)
        X = rng.standard_normal((n_samples, env.dimension)) + feature_shift(env, t)
        means = arm_means(env, X, t)
        total = np.zeros(len(env.metrics))
        # vectorized when the policy supports matrix input
        for i in range(n_samples):
            dist = policy(X[i])
            for a, p in dist.items():
                total += p * means[i, env.actions.index(a), :]
        return dict(zip(env.metrics, total / n_samples))
    if env.kind == "mdp":
        gamma = env.params.get("gamma", 0.9) if gamma is None else gamma
        return mdp_policy_value_infinite(env, policy, gamma)
    raise errors.BadEnv(env.kind)


def oracle_value_vectorized(env: EnvSpec, dist_matrix_fn, t: float = 0.0,
                            n_samples: int = 200_000,
                            seed: int = 0) -> dict[str, float]:
    """Fast bandit/hte oracle: dist_matrix_fn(X) -> (n, n_actions)."""
    rng = np.random.RandomState(seed)
    X = rng.standard_normal((n_samples, env.dimension)) + feature_shift(env, t)
    means = arm_means(env, X, t)
    D = np.asarray(dist_matrix_fn(X), dtype=float)
    vals = np.einsum("na,nam->m", D, means) / n_samples
    return dict(zip(env.metrics, vals))


def oracle_optimal(env: EnvSpec, weights: Optional[Mapping[str, float]] = None,
                   t: float = 0.0, n_samples: int = 200_000,
                   seed: int = 0) -> dict[str, float]:
    """Value of the pointwise-argmax (bandit/hte) or optimal (mdp) policy.

    weights scalarize multiple metrics; defaults to the first metric alone.
    """
    w = np.zeros(len(env.metrics))
    if weights is None:
        w[0] = 1.0
    else:
        for j, m in enumerate(env.metrics):
            w[j] = weights.get(m, 0.0)
    if env.kind in ("bandit", "hte"):
        rng = np.random.RandomState(seed)
        X = rng.standard_normal((n_samples, env.dimension)) + feature_shift(env, t)
        means = arm_means(env, X, t)
        best = np.argmax(means @ w, axis=1)
        vals = means[np.arange(n_samples), best, :].mean(axis=0)
        return dict(zip(env.metrics, vals))
    if env.kind == "mdp":
        return mdp_optimal_value(env, dict(zip(env.metrics, w)))[0]
    raise errors.BadEnv(env.kind)


def mdp_policy_value(env: EnvSpec, policy: DistPolicy,
                     gamma: float) -> dict[str, float]:
    """Exact finite-horizon discounted per-metric value from the start
    distribution, by backward induction."""
    P = np.asarray(env.params["transitions"], dtype=float)
    start = np.asarray(env.params["start"], dtype=float)
    horizon = int(env.params["horizon"])
    n_states, n_actions = P.shape[0], P.shape[1]
    Pi = np.zeros((n_states, n_actions))
    for s in range(n_states):
        for a, p in policy(s).items():
            Pi[s, env.actions.index(a)] = p
    out = {}
    for metric in env.metrics:
        R = np.asarray(env.params["rewards"][metric], dtype=float)
        V = np.zeros(n_states)
        for _ in range(horizon):
            Q = R + gamma * P @ V
            V = (Pi * Q).sum(axis=1)
        out[metric] = float(start @ V)
    return out


def mdp_policy_value_infinite(env: EnvSpec, policy: DistPolicy,
                              gamma: float) -> dict[str, float]:
    """Infinite-horizon per-metric value by linear solve."""
    P = np.asarray(env.params["transitions"], dtype=float)
    start = np.asarray(env.params["start"], dtype=float)
    n_states, n_actions = P.shape[0], P.shape[1]
    Pi = np.zeros((n_states, n_actions))
    for s in range(n_states):
        for a, p in policy(s).items():
            Pi[s, env.actions.index(a)] = p
    P_pi = np.einsum("sa,sat->st", Pi, P)
    out = {}
    for metric in env.metrics:
        R = np.asarray(env.params["rewards"][metric], dtype=float)
        r_pi = (Pi * R).sum(axis=1)
        V = np.linalg.solve(np.eye(n_states) - gamma * P_pi, r_pi)
        out[metric] = float(start @ V)
    return out


def mdp_optimal_value(env: EnvSpec, weights: Mapping[str, float],
                      gamma: Optional[float] = None,
                      ) -> tuple[dict[str, float], dict[int, str]]:
    """Finite-horizon optimal value under scalarized rewards.

    Returns the per-metric value of the stationary infinite-horizon optimal
    policy (from value iteration) evaluated on the finite horizon, plus
    that policy as {state: action}.
    """
    gamma = env.params.get("gamma", 0.9) if gamma is None else gamma
    P = np.asarray(env.params["transitions"], dtype=float)
    R = sum(weights.get(m, 0.0) * np.asarray(env.params["rewards"][m],
                                             dtype=float)
            for m in env.metrics)
    Q = value_iteration(P, R, gamma)
    greedy = {s: env.actions[int(np.argmax(Q[s]))] for s in range(P.shape[0])}

    def policy(s):
        return {greedy[s]: 1.0}

    return mdp_policy_value(env, policy, gamma), greedy


def value_iteration(P: np.ndarray, R: np.ndarray, gamma: float,
                    tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Infinite-horizon optimal Q for transition tensor P and reward R."""
    n_states, n_actions = R.shape
    Q = np.zeros((n_states, n_actions))
    for _ in range(max_iter):
        V = Q.max(axis=1)
        Q_new = R + gamma * P @ V
        if np.abs(Q_new - Q).max() < tol:
            return Q_new
        Q = Q_new
    return Q


# --- canonical presets ----------------------------------------------------

def catalog() -> dict[str, EnvSpec]:
    """Named environment presets used throughout the verification suite."""
    return {
        "hte-signflip": EnvSpec(
            name="hte-signflip", kind="hte", dimension=3,
            actions=("control", "treatment"), metrics=("reward",),
            noise=0.1,
            params={
                "treatment_action": "treatment",
                "baseline": {"reward": {"type": "linear",
                                        "weights": [0.0, 0.1, 0.0],
                                        "intercept": 0.5}},
                "uplift": {"reward": {"type": "signflip", "feature": 0,
                                      "amplitude": 0.1}},
            }),
        "chain-mdp-2metric": EnvSpec(
            name="chain-mdp-2metric", kind="mdp", dimension=1,
            actions=("push", "rest"), metrics=("engagement", "thrift"),
            noise=0.0,
            params=_chain_mdp_params()),
        "bandit-drift": EnvSpec(
            name="bandit-drift", kind="bandit", dimension=2,
            actions=("keep", "send"), metrics=("success",),
            noise=0.0,
            params={
                "binary_outcomes": True,
                "arm_means": {
                    "keep": {"success": {"type": "const", "value": 0.45}},
                    "send": {"success": {"type": "step", "feature": 0,
                                         "low": 0.2, "high": 0.7,
                                         "boundary": 0.0,
                                         "boundary_tracks_drift": True}},
                },
            },
            drift_schedule=(((500.0, (2.0, 0.0))),)),
        "bandit-imbalanced": EnvSpec(
            name="bandit-imbalanced", kind="bandit", dimension=2,
            actions=("keep", "send"), metrics=("success",),
            noise=0.0,
            params={
                "binary_outcomes": True,
                "arm_means": {
                    "keep": {"success": {"type": "const", "value": 0.25}},
                    "send": {"success": {"type": "linear",
                                         "weights": [0.15, 0.0],
                                         "intercept": 0.2}},
                },
            }),
    }


def _chain_mdp_params() -> dict:
    # 5-state chain: "push" climbs and earns engagement scaled by state,
    # "rest" earns thrift (also scaled by state) but decays the state, so
    # the two metrics trade off through the state the policy maintains.
    n = 5
    P = np.zeros((n, 2, n))
    for s in range(n):
        up = min(s + 1, n - 1)
        P[s, 0, up] += 0.9
        P[s, 0, s] += 0.1
        down = max(s - 1, 0)
        P[s, 1, down] += 0.5
        P[s, 1, s] += 0.5
    engagement = np.zeros((n, 2))
    thrift = np.zeros((n, 2))
    for s in range(n):
        engagement[s, 0] = 0.25 * s
        thrift[s, 1] = 0.1 + 0.15 * s
    return {
        "transitions": P.tolist(),
        "rewards": {"engagement": engagement.tolist(),
                    "thrift": thrift.tolist()},
        "start": [1.0, 0.0, 0.0, 0.0, 0.0],
        "horizon": 400,
        "gamma": 0.9,
    }


def catalog_records() -> str:
    """The preset catalog as versioned newline-delimited JSON records."""
    lines = []
    for name, env in sorted(catalog().items()):
        lines.append(json.dumps({
            "catalog_version": CATALOG_VERSION,
            "name": name,
            "kind": env.kind,
            "dimension": env.dimension,
            "actions": list(env.actions),
            "metrics": list(env.metrics),
            "noise": env.noise,
            "params": env.params,
            "drift_schedule": [[when, list(delta)]
                               for when, delta in env.drift_schedule],
        }, sort_keys=True))
    return "\n".join(lines) + "\n"


def load_env(record: str | dict) -> EnvSpec:
    d = json.loads(record) if isinstance(record, str) else record
    if d.get("catalog_version") != CATALOG_VERSION:
        raise errors.BadEnv("unsupported catalog version")
    return EnvSpec(
        name=d["name"], kind=d["kind"], dimension=d["dimension"],
        actions=tuple(d["actions"]), metrics=tuple(d["metrics"]),
        noise=d["noise"], params=d["params"],
        drift_schedule=tuple((when, tuple(delta))
                             for when, delta in d["drift_schedule"]))
