"""Self-serve offline RL: transitions, coverage gates, fitted Q iteration
and fitted Q evaluation with tabular or linear function approximation.

States may be hashable ids (tabular) or dense vectors (linear weights over
the state x action-one-hot feature map). Training is single-threaded and a
QFunction is immutable after fit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Optional, Sequence, Union

import numpy as np

from . import errors
from .eventlog import JoinedExample
from .policy import DecisionPolicy

State = Union[Hashable, np.ndarray]

COVERAGE_MIN_COUNT = 50
COVERAGE_MIN_FRACTION = 0.01


@dataclass(frozen=True)
class Transition:
    state: State
    action: str
    rewards: dict[str, float]
    next_state: Optional[State]
    terminal: bool
    propensity: float
    start: bool = False  # first transition of its episode

    def __post_init__(self):
        if not (0.0 < self.propensity <= 1.0):
            raise ValueError(f"propensity {self.propensity}")


@dataclass(frozen=True)
class CoverageReport:
    counts: dict[str, int]
    min_propensity: float
    passed: bool
    uncovered: tuple[str, ...]
    threshold: int


@dataclass(frozen=True)
class QFunction:
    """Tabular table[state][action] or linear weights over state x action."""

    kind: str  # "tabular" | "linear"
    actions: tuple[str, ...]
    gamma: float
    reward_weights: dict[str, float]
    table: Optional[dict] = None            # tabular: {state: {action: q}}
    weights: Optional[np.ndarray] = None    # linear: (d * n_actions,)
    state_dim: int = 0

    def value(self, state: State, action: str) -> float:
        if self.kind == "tabular":
            return self.table.get(state, {}).get(action, 0.0)
        return float(self._phi(state, action) @ self.weights)

    def action_values(self, state: State) -> dict[str, float]:
        return {a: self.value(state, a) for a in self.actions}

    def _phi(self, state: State, action: str) -> np.ndarray:
        s = np.asarray(state, dtype=float)
        out = np.zeros(self.state_dim * len(self.actions))
        i = self.actions.index(action)
        out[i * self.state_dim:(i + 1) * self.state_dim] = s
        return out


def build_transitions(examples: Sequence[JoinedExample],
                      state_fn: Callable[[JoinedExample], State],
                      ) -> list[Transition]:
    """Turn per-unit ordered examples into one-step transitions.

    Consecutive same-unit examples become (s, a, r, s'); the last example
    of each unit is terminal. Raises UnorderedInput when a unit's
    timestamps go backwards.
    """
    by_unit: dict[str, list[JoinedExample]] = {}
    for ex in examples:
        group = by_unit.setdefault(ex.unit_id, [])
        if group and ex.timestamp < group[-1].timestamp:
            raise errors.UnorderedInput(
                f"unit {ex.unit_id!r} timestamps out of order")
        group.append(ex)
    out: list[Transition] = []
    for unit in sorted(by_unit):
        group = by_unit[unit]
        for i, ex in enumerate(group):
            terminal = i == len(group) - 1
            out.append(Transition(
                state=state_fn(ex),
                action=ex.action,
                rewards=dict(ex.metric_values),
                next_state=None if terminal else state_fn(group[i + 1]),
                terminal=terminal,
                propensity=ex.propensity,
                start=i == 0,
            ))
    return out


def check_coverage(transitions: Sequence[Transition],
                   actions: Sequence[str]) -> CoverageReport:
    """Every action needs at least max(50, 1% of n) logged transitions."""
    n = len(transitions)
    threshold = max(COVERAGE_MIN_COUNT, int(np.ceil(COVERAGE_MIN_FRACTION * n)))
    counts = {a: 0 for a in actions}
    min_prop = 1.0
    for t in transitions:
        if t.action in counts:
            counts[t.action] += 1
        min_prop = min(min_prop, t.propensity)
    uncovered = tuple(a for a in actions if counts[a] < threshold)
    return CoverageReport(counts=counts, min_propensity=min_prop,
                          passed=not uncovered, uncovered=uncovered,
                          threshold=threshold)


def _scalar_rewards(transitions: Sequence[Transition],
                    w: Mapping[str, float]) -> np.ndarray:
    wsum = sum(w.values())
    if abs(wsum - 1.0) > 1e-9 or any(v < 0 for v in w.values()):
        raise errors.NegativeWeight(f"reward weights must be a simplex: {w}")
    return np.array([sum(w[m] * t.rewards.get(m, 0.0) for m in w)
                     for t in transitions])


def fit_fqi(transitions: Sequence[Transition], reward_weights: Mapping[str, float],
            gamma: float, iterations: int = 200, seed: int = 0,
            actions: Optional[Sequence[str]] = None,
            skip_coverage: bool = False) -> QFunction:
    """Fitted Q iteration on the scalarized reward w . r.

    Tabular when states are hashable; converges to the Bellman fixpoint of
    the empirical MDP. Vector states use ridge-regressed linear Q.
    """
    if not (0.0 <= gamma < 1.0):
        raise errors.BadGamma(str(gamma))
    if actions is None:
        actions = tuple(sorted({t.action for t in transitions}))
    else:
        actions = tuple(actions)
    report = check_coverage(transitions, actions)
    if not transitions or (not skip_coverage and not report.passed):
        raise errors.CoverageFailure(
            f"uncovered actions: {report.uncovered or 'no data'}")
    r = _scalar_rewards(transitions, reward_weights)
    tabular = not isinstance(transitions[0].state, np.ndarray)
    if tabular:
        table = _fqi_tabular(transitions, r, gamma, iterations, actions)
        return QFunction(kind="tabular", actions=actions, gamma=gamma,
                         reward_weights=dict(reward_weights), table=table)
    weights, dim = _fqi_linear(transitions, r, gamma, iterations, actions)
    return QFunction(kind="linear", actions=actions, gamma=gamma,
                     reward_weights=dict(reward_weights), weights=weights,
                     state_dim=dim)


class _TabularIndex:
    """Integer indexing of states and observed (state, action) pairs."""

    def __init__(self, transitions, actions):
        self.actions = tuple(actions)
        self.states = sorted({t.state for t in transitions})
        self.s_of = {s: i for i, s in enumerate(self.states)}
        self.a_of = {a: i for i, a in enumerate(self.actions)}
        n = len(transitions)
        self.si = np.array([self.s_of[t.state] for t in transitions])
        self.ai = np.array([self.a_of[t.action] for t in transitions])
        self.next_si = np.array(
            [-1 if t.terminal else self.s_of.get(t.next_state, -1)
             for t in transitions])
        self.group = self.si * len(self.actions) + self.ai
        self.n_cells = len(self.states) * len(self.actions)
        self.counts = np.bincount(self.group, minlength=self.n_cells)
        self.observed = (self.counts > 0).reshape(len(self.states),
                                                  len(self.actions))

    def group_mean(self, targets: np.ndarray) -> np.ndarray:
        """Per-(state, action) mean of targets, (S, A); unobserved -> 0."""
        sums = np.bincount(self.group, weights=targets,
                           minlength=self.n_cells)
        with np.errstate(invalid="ignore", divide="ignore"):
            q = sums / self.counts
        q[self.counts == 0] = 0.0
        return q.reshape(len(self.states), len(self.actions))


def _fqi_tabular(transitions, r, gamma, iterations, actions):
    ix = _TabularIndex(transitions, actions)
    q = np.zeros((len(ix.states), len(ix.actions)))
    nonterm = ix.next_si >= 0
    for _ in range(iterations):
        masked = np.where(ix.observed, q, -np.inf)
        values = masked.max(axis=1)
        values[~ix.observed.any(axis=1)] = 0.0
        targets = r.copy()
        targets[nonterm] += gamma * values[ix.next_si[nonterm]]
        new_q = ix.group_mean(targets)
        if np.abs(new_q - q).max() < 1e-10:
            q = new_q
            break
        q = new_q
    return {s: {a: float(q[ix.s_of[s], ix.a_of[a]])
                for a in actions if ix.observed[ix.s_of[s], ix.a_of[a]]}
            for s in ix.states}


def _fqi_linear(transitions, r, gamma, iterations, actions, ridge=1e-6):
    dim = len(np.asarray(transitions[0].state, dtype=float))
    k = len(actions)
    idx = {a: i for i, a in enumerate(actions)}
    n = len(transitions)
    Phi = np.zeros((n, dim * k))
    S_next = np.zeros((n, dim))
    terminal = np.zeros(n, dtype=bool)
    for i, t in enumerate(transitions):
        j = idx[t.action]
        Phi[i, j * dim:(j + 1) * dim] = np.asarray(t.state, dtype=float)
        terminal[i] = t.terminal
        if not t.terminal:
            S_next[i] = np.asarray(t.next_state, dtype=float)
    A = Phi.T @ Phi + ridge * np.eye(dim * k)
    w = np.zeros(dim * k)
    for _ in range(iterations):
        next_vals = np.zeros(n)
        if (~terminal).any():
            per_action = np.stack(
                [S_next[~terminal] @ w[j * dim:(j + 1) * dim]
                 for j in range(k)], axis=1)
            next_vals[~terminal] = per_action.max(axis=1)
        targets = r + gamma * next_vals
        w_new = np.linalg.solve(A, Phi.T @ targets)
        if np.abs(w_new - w).max() < 1e-10:
            w = w_new
            break
        w = w_new
    return w, dim


PolicyFn = Callable[[State], Mapping[str, float]]


def fqe(transitions: Sequence[Transition], pi: PolicyFn, gamma: float,
        iterations: int = 200,
        actions: Optional[Sequence[str]] = None,
        skip_coverage: bool = False) -> dict[str, float]:
    """Fitted Q evaluation of a target policy, one channel per metric.

    pi maps a state to an action distribution. Returns the per-metric
    estimated discounted return averaged over episode-start states.
    """
    if not (0.0 <= gamma < 1.0):
        raise errors.BadGamma(str(gamma))
    if actions is None:
        actions = tuple(sorted({t.action for t in transitions}))
    else:
        actions = tuple(actions)
    report = check_coverage(transitions, actions)
    if not transitions or (not skip_coverage and not report.passed):
        raise errors.CoverageFailure(
            f"uncovered actions: {report.uncovered or 'no data'}")
    metrics = sorted({m for t in transitions for m in t.rewards})
    ix = _TabularIndex(transitions, actions)
    # Target policy distribution per state, masked to observed actions.
    pi_mat = np.zeros((len(ix.states), len(ix.actions)))
    for s, i in ix.s_of.items():
        dist = pi(s)
        for a, p in dist.items():
            if a in ix.a_of:
                pi_mat[i, ix.a_of[a]] = p
    pi_obs = pi_mat * ix.observed
    nonterm = ix.next_si >= 0
    R = np.array([[t.rewards.get(m, 0.0) for m in metrics]
                  for t in transitions])
    Q = np.zeros((len(ix.states), len(ix.actions), len(metrics)))
    for _ in range(iterations):
        values = np.einsum("sa,sam->sm", pi_obs, Q)
        targets = R.copy()
        targets[nonterm] += gamma * values[ix.next_si[nonterm]]
        new_Q = np.stack([ix.group_mean(targets[:, j])
                          for j in range(len(metrics))], axis=2)
        if np.abs(new_Q - Q).max() < 1e-10:
            Q = new_Q
            break
        Q = new_Q
    start_states = np.array([ix.s_of[t.state]
                             for t in transitions if t.start])
    if len(start_states) == 0:
        return {m: 0.0 for m in metrics}
    start_values = np.einsum("sa,sam->sm", pi_obs, Q)[start_states]
    return dict(zip(metrics, start_values.mean(axis=0)))


def greedy_policy_from_q(q: QFunction, epsilon: float = 0.05,
                         version: str = "rl-v1") -> DecisionPolicy:
    """An rl-greedy decision policy over the Q function's actions.

    Ties resolve to the lowest action id because actions are sorted.
    """
    return DecisionPolicy(kind="rl-greedy", actions=tuple(sorted(q.actions)),
                          epsilon=epsilon, version=version)


def greedy_action_fn(q: QFunction, epsilon: float = 0.0) -> PolicyFn:
    """The epsilon-greedy action distribution induced by a Q function."""
    k = len(q.actions)

    def pi(state: State) -> dict[str, float]:
        vals = q.action_values(state)
        best = min(sorted(vals), key=lambda a: (-vals[a], a))
        return {a: (1.0 - epsilon + epsilon / k if a == best else epsilon / k)
                for a in q.actions}

    return pi
