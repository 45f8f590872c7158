"""Bayesian intent filter and the belief-dependent reward.

The filter tracks a single scalar: the probability that the opponent is an
adversary. Likelihoods come from the neutral reaction table and the
hyper-prior-averaged adversary model, never from the specific family member
the simulator happened to draw.
"""
from __future__ import annotations

import math

from .env import AgentAction, Intent, OpponentAction, state_reward
from .opponents import averaged_adversary_policy, neutral_policy

# Interior beliefs are kept this far from {0, 1} so the entropy term stays
# finite under float rounding; exact 0/1 inputs pass through untouched.
BELIEF_EPS = 1e-12


def belief_update(b: float, d: int, a_a: AgentAction | int,
                  a_o: OpponentAction | int) -> float:
    """One Bayes step on the adversary probability after observing a reaction."""
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"belief {b} outside [0, 1]")
    if b == 0.0 or b == 1.0:
        return b
    l_adv = averaged_adversary_policy(d, a_a)[int(a_o)]
    l_neu = neutral_policy(a_a)[int(a_o)]
    denom = b * l_adv + (1.0 - b) * l_neu
    assert denom > 0.0, "both hypotheses assign zero likelihood"
    posterior = b * l_adv / denom
    return min(max(posterior, BELIEF_EPS), 1.0 - BELIEF_EPS)


def belief_entropy(b: float) -> float:
    """Binary entropy in nats, with 0*log(0) taken as 0."""
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"belief {b} outside [0, 1]")
    if b == 0.0 or b == 1.0:
        return 0.0
    return -b * math.log(b) - (1.0 - b) * math.log(1.0 - b)


def hybrid_reward(b_post: float, intent: Intent | int, a_a: AgentAction | int) -> float:
    """Round reward: a certainty bonus (negative entropy of the post-reaction
    belief) plus the state-dependent penalty for the action just taken."""
    return -belief_entropy(b_post) + state_reward(intent, a_a)
