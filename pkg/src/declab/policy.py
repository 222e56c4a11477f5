"""Decision policies: post-processing from model outputs to product decisions.

All policies share uniform-epsilon exploration so that logged propensities
are exact rational numbers: the greedy action gets 1 - eps + eps/K and every
other action eps/K.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import errors


@dataclass(frozen=True)
class DecisionPolicy:
    """A parameterized post-processing rule with logged propensities.

    kind: "threshold" (binary accept iff score >= theta),
          "value-argmax" (argmax of nonnegative metric scalarization),
          "uplift" (treat iff predicted uplift > threshold),
          "rl-greedy" (argmax of a Q table keyed by action).
    """

    kind: str
    actions: tuple[str, ...]
    epsilon: float = 0.0
    version: str = "v0"
    theta: float = 0.5
    metric_weights: Optional[dict[str, float]] = None
    param_space: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.epsilon < 1.0):
            raise ValueError("epsilon must be in [0, 1)")
        if self.kind == "threshold" and not (0.0 <= self.theta <= 1.0):
            raise ValueError("theta must be in [0, 1]")
        if self.metric_weights is not None:
            w = np.array(list(self.metric_weights.values()))
            if (w < 0).any() or w.sum() <= 0:
                raise ValueError("metric weights must be >= 0, not all zero")

    def greedy_action(self, outputs: Mapping[str, object]) -> str:
        """The exploitation choice before epsilon softening."""
        missing = set(self.actions) - set(outputs)
        if missing:
            raise errors.MissingActionOutput(", ".join(sorted(missing)))
        if self.kind == "threshold":
            accept, reject = self.actions[1], self.actions[0]
            score = float(outputs[accept])
            return accept if score >= self.theta else reject
        if self.kind == "uplift":
            treat, control = self.actions[1], self.actions[0]
            tau = float(outputs[treat]) - float(outputs[control])
            return treat if tau > self.theta else control
        # value-argmax and rl-greedy: score each action, ties -> first action
        best, best_value = None, -np.inf
        for action in self.actions:
            out = outputs[action]
            if self.kind == "value-argmax" and self.metric_weights is not None:
                value = sum(w * float(out[m])
                            for m, w in self.metric_weights.items())
            else:
                value = float(out)
            if value > best_value:
                best, best_value = action, value
        return best


def decide(policy: DecisionPolicy, outputs: Mapping[str, object],
           seed: int) -> tuple[str, float]:
    """Pick an action and report its exact propensity.

    Greedy with probability 1 - eps, otherwise uniform over all actions;
    deterministic given (policy, outputs, seed).
    """
    greedy = policy.greedy_action(outputs)
    k = len(policy.actions)
    rng = np.random.RandomState(seed)
    if policy.epsilon > 0 and rng.random_sample() < policy.epsilon:
        action = policy.actions[rng.randint(k)]
    else:
        action = greedy
    return action, propensity_of(policy, outputs, action)


def propensity_of(policy: DecisionPolicy, outputs: Mapping[str, object],
                  action: str) -> float:
    """Probability decide() assigns to the action; sums to 1 over actions."""
    greedy = policy.greedy_action(outputs)
    k = len(policy.actions)
    if action == greedy:
        return 1.0 - policy.epsilon + policy.epsilon / k
    return policy.epsilon / k


def action_distribution(policy: DecisionPolicy,
                        outputs: Mapping[str, object]) -> dict[str, float]:
    return {a: propensity_of(policy, outputs, a) for a in policy.actions}


def rank_items(scored: Mapping[str, float],
               top_n: Optional[int] = None) -> list[str]:
    """Descending by score; ties broken by item id ascending."""
    for item, score in scored.items():
        if not np.isfinite(score):
            raise ValueError(f"non-finite score for {item!r}")
    ordered = sorted(scored, key=lambda item: (-scored[item], item))
    return ordered if top_n is None else ordered[:top_n]
