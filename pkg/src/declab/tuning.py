"""Product-metric optimization beyond the loss function.

Linear reward shaping over the metric simplex, Pareto front extraction with
exact 2-D hypervolume, a ParEGO-style proposer (random Chebyshev
scalarization + Gaussian-process surrogate with expected improvement), the
reward-tuning loop over fitted Q iteration, and the two-stage decision-policy
tuning loop (offline doubly-robust pruning, then simulated online
refinement).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats as sstats

from . import errors, offeval, rl, simlab
from .offeval import LoggedBanditDataset, PolicyEvaluation
from .policy import DecisionPolicy

LATTICE_SIZE = 8
ACQUISITION_CANDIDATES = 512
GP_NOISE = 1e-4
PAREGO_RHO = 0.05


@dataclass(frozen=True)
class TuningTrial:
    trial_id: int
    config: tuple[float, ...]
    observed: tuple[float, ...]
    source: str  # "lattice" | "surrogate"
    seed: int


@dataclass(frozen=True)
class TunedCandidate:
    trial_id: int
    reward_weights: dict[str, float]
    policy: DecisionPolicy
    q_function: rl.QFunction
    evaluation: PolicyEvaluation


@dataclass(frozen=True)
class ParetoFront:
    candidates: tuple[TunedCandidate, ...]
    all_trials: tuple[TuningTrial, ...]
    metrics: tuple[str, ...]
    hypervolume: Optional[float] = None
    reference_point: Optional[tuple[float, ...]] = None


# --- scalarization and Pareto tools --------------------------------------

def scalarize(weights: Mapping[str, float], values: Mapping[str, float],
              directions: Optional[Mapping[str, str]] = None) -> float:
    """Nonnegative linear scalarization w . m, direction-adjusted so every
    metric is maximized (minimize metrics contribute negated)."""
    if set(weights) != set(values):
        raise errors.DimensionMismatch(
            f"weights {sorted(weights)} vs values {sorted(values)}")
    for name, w in weights.items():
        if w < 0:
            raise errors.NegativeWeight(f"{name}: {w}")
    total = 0.0
    for name, w in weights.items():
        sign = -1.0 if directions and directions.get(name) == "minimize" else 1.0
        total += w * sign * values[name]
    return total


def nondominated_set(points: Sequence[Sequence[float]]) -> list[int]:
    """Indices of Pareto-optimal points (maximize all coordinates)."""
    pts = [tuple(p) for p in points]
    if pts and any(len(p) != len(pts[0]) for p in pts):
        raise errors.DimensionMismatch("mixed dimensions")
    keep = []
    for i, p in enumerate(pts):
        dominated = False
        for j, q in enumerate(pts):
            if j == i:
                continue
            if all(qk >= pk for qk, pk in zip(q, p)) and q != p:
                dominated = True
                break
            if q == p and j < i:  # exact duplicates keep the first
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep


def hypervolume_2d(front: Sequence[Sequence[float]],
                   reference: Sequence[float]) -> float:
    """Exact sweep-line area dominated by a 2-D front above a reference."""
    ref = tuple(reference)
    if len(ref) != 2 or any(len(p) != 2 for p in front):
        raise errors.BadReference("hypervolume_2d needs 2-D points")
    for p in front:
        if not (p[0] > ref[0] and p[1] > ref[1]):
            raise errors.BadReference(f"point {p} does not dominate {ref}")
    keep = nondominated_set(list(front))
    pts = sorted((tuple(front[i]) for i in keep), reverse=True)
    area = 0.0
    y_floor = ref[1]
    for x, y in pts:  # descending x, ascending y among nondominated points
        area += (x - ref[0]) * (y - y_floor)
        y_floor = y
    return area


# --- GP surrogate with expected improvement -------------------------------

def _lattice(bounds: Sequence[tuple[float, float]],
             size: int = LATTICE_SIZE) -> np.ndarray:
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    d = len(bounds)
    if d == 1:
        unit = np.linspace(0.0, 1.0, size)[:, None]
    else:
        # fixed van der Corput lattice per dimension (bases 2, 3, 5, ...)
        bases = [2, 3, 5, 7, 11, 13, 17, 19][:d]
        unit = np.array([[_vdc(i + 1, b) for b in bases]
                         for i in range(size)])
    return lo + unit * (hi - lo)


def _vdc(n: int, base: int) -> float:
    q, denom = 0.0, 1.0
    while n:
        denom *= base
        n, rem = divmod(n, base)
        q += rem / denom
    return q


def _gp_fit(X: np.ndarray, y: np.ndarray):
    """Squared-exponential GP with median-heuristic length scale."""
    if len(X) > 1:
        dists = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
        positive = dists[dists > 0]
        ell = float(np.median(positive)) if positive.size else 1.0
    else:
        ell = 1.0
    ell = max(ell, 1e-6)

    def kernel(A, B):
        sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
        return np.exp(-sq / (2 * ell * ell))

    K = kernel(X, X) + GP_NOISE * np.eye(len(X))
    L = np.linalg.cholesky(K)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, y))

    def predict(Z):
        Kz = kernel(Z, X)
        mean = Kz @ alpha
        v = np.linalg.solve(L, Kz.T)
        var = np.clip(1.0 - (v * v).sum(axis=0), 1e-12, None)
        return mean, np.sqrt(var)

    return predict


def _expected_improvement(mean: np.ndarray, sd: np.ndarray,
                          best: float) -> np.ndarray:
    z = (mean - best) / sd
    return (mean - best) * sstats.norm.cdf(z) + sd * sstats.norm.pdf(z)


def propose_config(history: Sequence[TuningTrial],
                   bounds: Sequence[tuple[float, float]],
                   seed: int) -> tuple[float, ...]:
    """Next configuration to try.

    The first LATTICE_SIZE proposals walk a fixed lattice; afterwards a
    ParEGO step draws seeded Chebyshev scalarization weights, fits a GP on
    the scalarized history, and returns the expected-improvement argmax
    over ACQUISITION_CANDIDATES seeded uniform points.
    """
    if not bounds or any(hi <= lo for lo, hi in bounds):
        raise errors.EmptySpace(str(bounds))
    step = len(history)
    if step < LATTICE_SIZE:
        return tuple(_lattice(bounds)[step])
    rng = np.random.RandomState((seed * 1_000_003 + step) % (2 ** 31 - 1))
    X = np.array([t.config for t in history], dtype=float)
    M = np.array([t.observed for t in history], dtype=float)
    # normalize metrics to [0, 1] and scalarize with Chebyshev weights
    lo_m, hi_m = M.min(axis=0), M.max(axis=0)
    span = np.where(hi_m - lo_m > 1e-12, hi_m - lo_m, 1.0)
    Z = (M - lo_m) / span
    lam = rng.dirichlet(np.ones(M.shape[1]))
    # augmented Chebyshev cost on the normalized shortfalls, negated so the
    # GP-EI step maximizes
    shortfall = lam * (1.0 - Z)
    y = -(shortfall.max(axis=1) + PAREGO_RHO * shortfall.sum(axis=1))
    predict = _gp_fit(X, y)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    cands = lo + rng.random_sample((ACQUISITION_CANDIDATES, len(bounds))) * (hi - lo)
    mean, sd = predict(cands)
    ei = _expected_improvement(mean, sd, float(y.max()))
    return tuple(cands[int(np.argmax(ei))])


# --- reward tuning over FQI ----------------------------------------------

def simplex_weights(config: Sequence[float],
                    metrics: Sequence[str]) -> dict[str, float]:
    """Map a box config in [0,1]^(M-1) to simplex weights over metrics.

    One metric: always weight 1. Two metrics: config (c,) -> (c, 1-c).
    More: stick-breaking over the config coordinates.
    """
    metrics = list(metrics)
    if len(metrics) == 1:
        return {metrics[0]: 1.0}
    remaining = 1.0
    out = {}
    for name, c in zip(metrics[:-1], config):
        out[name] = remaining * float(c)
        remaining -= out[name]
    out[metrics[-1]] = remaining
    return out


def tune_reward(transitions: Sequence[rl.Transition],
                metrics: Sequence[str],
                budget: int, seed: int,
                gamma: float = 0.9,
                actions: Optional[Sequence[str]] = None,
                exploration_epsilon: float = 0.05,
                reference_point: Optional[Sequence[float]] = None,
                ) -> ParetoFront:
    """Explore linear reward weights, train a greedy policy per weight by
    fitted Q iteration, score it per metric with fitted Q evaluation, and
    return the nondominated candidates.

    Deterministic in (seed, budget, transitions).
    """
    if budget < LATTICE_SIZE:
        raise ValueError(f"budget must be >= {LATTICE_SIZE}")
    metrics = list(metrics)
    if actions is None:
        actions = tuple(sorted({t.action for t in transitions}))
    report = rl.check_coverage(transitions, actions)
    if not report.passed:
        raise errors.CoverageFailure(f"uncovered: {report.uncovered}")
    bounds = [(0.0, 1.0)] * max(1, len(metrics) - 1)
    trials: list[TuningTrial] = []
    results: list[tuple[TuningTrial, rl.QFunction, dict[str, float],
                        dict[str, tuple[float, float]]]] = []
    for trial_id in range(budget):
        config = propose_config(trials, bounds, seed)
        weights = simplex_weights(config, metrics)
        q = rl.fit_fqi(transitions, weights, gamma, actions=actions)
        pi = rl.greedy_action_fn(q)
        estimates, intervals = _fqe_with_intervals(
            transitions, pi, gamma, actions)
        observed = tuple(estimates[m] for m in metrics)
        trial = TuningTrial(
            trial_id=trial_id, config=tuple(config), observed=observed,
            source="lattice" if trial_id < LATTICE_SIZE else "surrogate",
            seed=seed)
        trials.append(trial)
        results.append((trial, q, estimates, intervals))
    keep = set(nondominated_set([t.observed for t in trials]))
    candidates = []
    for trial, q, estimates, intervals in results:
        if trial.trial_id not in keep:
            continue
        weights = simplex_weights(trial.config, metrics)
        policy = rl.greedy_policy_from_q(
            q, epsilon=exploration_epsilon,
            version=f"rl-tuned-{trial.trial_id}")
        candidates.append(TunedCandidate(
            trial_id=trial.trial_id, reward_weights=weights, policy=policy,
            q_function=q,
            evaluation=PolicyEvaluation(
                estimator="fqe", estimates=estimates, intervals=intervals,
                effective_sample_size=float(len(transitions)),
                max_weight=1.0, clipped_fraction=0.0, n=len(transitions))))
    hv = None
    ref = None
    if len(metrics) == 2 and candidates:
        pts = [c.evaluation.estimates for c in candidates]
        vecs = [(p[metrics[0]], p[metrics[1]]) for p in pts]
        lo0 = min(v[0] for v in vecs) - 1.0
        lo1 = min(v[1] for v in vecs) - 1.0
        ref = (lo0, lo1) if reference_point is None else tuple(reference_point)
        hv = hypervolume_2d(vecs, ref)
    return ParetoFront(candidates=tuple(candidates), all_trials=tuple(trials),
                       metrics=tuple(metrics), hypervolume=hv,
                       reference_point=ref)


def _fqe_with_intervals(transitions, pi, gamma, actions):
    estimates = rl.fqe(transitions, pi, gamma, actions=actions)
    n_eps = sum(1 for t in transitions if t.start)
    intervals = {}
    for m, v in estimates.items():
        # normal-approximation interval from per-episode empirical spread
        rewards = [t.rewards.get(m, 0.0) for t in transitions]
        sd = float(np.std(rewards)) * math.sqrt(max(1, len(transitions)) /
                                                max(1, n_eps)) / max(
            1.0, math.sqrt(n_eps))
        half = 1.96 * sd
        intervals[m] = (v - half, v + half)
    return estimates, intervals


# --- decision-policy tuning (offline prune -> simulated online) ----------

@dataclass(frozen=True)
class PolicyTuningReport:
    champion_config: float
    champion_estimate: float
    offline_estimates: dict[float, PolicyEvaluation]
    pruned: tuple[float, ...]
    survivors: tuple[float, ...]
    online_trials: tuple[TuningTrial, ...]
    recommended_config: float
    online_experiments_run: int


def tune_decision_policy(
        logged: LoggedBanditDataset,
        score_fn: Callable[[np.ndarray], float],
        env: simlab.EnvSpec,
        champion_theta: float,
        budget: int, seed: int,
        accept_action: Optional[str] = None,
        reject_action: Optional[str] = None,
        n_offline_candidates: int = LATTICE_SIZE,
        ab_test_n: int = 2000,
        metric: Optional[str] = None,
) -> PolicyTuningReport:
    """Two-stage threshold tuning.

    Stage 1 prunes candidate thresholds offline: each is scored by the
    doubly-robust estimator on the logged data and dropped when its upper
    CI bound falls below the champion's point estimate. Stage 2 refines
    survivors with simulated A/B tests against the champion, proposing
    additional thresholds through the GP surrogate; the recommendation is
    the best non-inferior tested candidate and never a pruned one.
    """
    metric = metric or logged.metrics[0]
    accept = accept_action or logged.actions[1]
    reject = reject_action or logged.actions[0]

    def target_policy(theta: float):
        def pi(x: np.ndarray) -> dict[str, float]:
            return {accept: 1.0, reject: 0.0} if score_fn(x) >= theta \
                else {accept: 0.0, reject: 1.0}
        return pi

    q_model = _fit_outcome_models(logged)
    champion_eval = offeval.doubly_robust(
        logged, target_policy(champion_theta), q_model, seed=seed)
    champion_point = champion_eval.estimates[metric]

    thetas = np.linspace(0.0, 1.0, n_offline_candidates)
    offline: dict[float, PolicyEvaluation] = {}
    pruned, survivors = [], []
    for theta in thetas:
        ev = offeval.doubly_robust(logged, target_policy(theta), q_model,
                                   seed=seed)
        offline[float(theta)] = ev
        upper = ev.intervals[metric][1]
        if upper < champion_point:
            pruned.append(float(theta))
        else:
            survivors.append(float(theta))

    def agent_for(theta: float) -> simlab.Agent:
        def agent(x, rng):
            return (accept, 1.0) if score_fn(x) >= theta else (reject, 1.0)
        return agent

    online_trials: list[TuningTrial] = []
    experiments = 0
    outcomes: dict[float, float] = {}
    online_budget = max(0, budget - len(thetas))
    if survivors and online_budget > 0:
        champion_agent = agent_for(champion_theta)
        queue = list(survivors[:online_budget])
        n_seeded = len(queue)
        while len(online_trials) < online_budget:
            if queue:
                theta = queue.pop(0)
                source = "lattice"
            else:
                config = propose_config(online_trials, [(0.0, 1.0)], seed)
                theta = float(config[0])
                source = "surrogate"
                if any(abs(p - theta) < 1e-9 for p in pruned):
                    theta = min(survivors, key=lambda s: abs(s - theta))
            result = simlab.run_ab_test(env, agent_for(theta), champion_agent,
                                        n=ab_test_n,
                                        seed=seed + len(online_trials))
            experiments += 1
            observed = result.arm_stats["A"][metric][1]
            outcomes[theta] = observed
            online_trials.append(TuningTrial(
                trial_id=len(online_trials), config=(theta,),
                observed=(observed,), source=source, seed=seed))

    if not outcomes:
        return PolicyTuningReport(
            champion_config=champion_theta, champion_estimate=champion_point,
            offline_estimates=offline, pruned=tuple(pruned),
            survivors=tuple(survivors), online_trials=tuple(online_trials),
            recommended_config=champion_theta, online_experiments_run=0)

    # best tested candidate that is statistically non-inferior: keep it
    # unless its A/B test showed a significant loss to the champion
    champion_online = simlab.run_ab_test(
        env, agent_for(champion_theta), agent_for(champion_theta),
        n=ab_test_n, seed=seed + 9999).arm_stats["A"][metric][1]
    best_theta = max(outcomes, key=lambda th: outcomes[th])
    recommended = best_theta if outcomes[best_theta] >= champion_online \
        else champion_theta
    return PolicyTuningReport(
        champion_config=champion_theta, champion_estimate=champion_point,
        offline_estimates=offline, pruned=tuple(pruned),
        survivors=tuple(survivors), online_trials=tuple(online_trials),
        recommended_config=recommended,
        online_experiments_run=experiments)


def _fit_outcome_models(logged: LoggedBanditDataset):
    """Per-action mean-outcome model for the doubly-robust stage.

    A per-action ridge linear fit keeps the estimator cheap; the DR
    correction absorbs residual model error.
    """
    X_all = np.stack([row.x for row in logged.rows])
    models: dict[str, dict[str, np.ndarray]] = {}
    d = X_all.shape[1]
    for action in logged.actions:
        idx = [i for i, row in enumerate(logged.rows) if row.action == action]
        models[action] = {}
        for m in logged.metrics:
            if len(idx) >= d + 1:
                Xa = np.hstack([X_all[idx], np.ones((len(idx), 1))])
                ya = np.array([logged.rows[i].rewards[m] for i in idx])
                w = np.linalg.solve(Xa.T @ Xa + 1e-6 * np.eye(d + 1),
                                    Xa.T @ ya)
            else:
                w = np.zeros(d + 1)
            models[action][m] = w

    def q(x: np.ndarray, action: str) -> dict[str, float]:
        xb = np.append(np.asarray(x, dtype=float), 1.0)
        return {m: float(xb @ w) for m, w in models[action].items()}

    return q
