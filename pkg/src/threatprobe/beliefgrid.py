"""Nominal belief-space dynamics shared by the grid-based solvers.

Both the tabular soft-value reference and the chance-constrained baseline
plan over the same one-dimensional belief state; this module tabulates the
two-hypothesis observation likelihoods and exposes the induced mixture
weights, posterior beliefs, and expected one-round reward, vectorized over
arrays of beliefs.
"""
from __future__ import annotations

import numpy as np

from .beliefs import BELIEF_EPS
from .env import INITIAL_DISTANCE, AgentAction, Intent, OpponentAction, state_reward
from .opponents import DEFAULT_QUAD_NODES, NEUTRAL_REACTION, averaged_adversary_policy


def binary_entropy(p):
    """Vectorized binary entropy in nats with 0*log(0) = 0."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    interior = (p > 0.0) & (p < 1.0)
    q = p[interior]
    out[interior] = -q * np.log(q) - (1.0 - q) * np.log(1.0 - q)
    return out if out.ndim else float(out)


def successor_distance(d: int, a_o: OpponentAction | int) -> int:
    return d if a_o == OpponentAction.STAY else max(0, d - 1)


class BeliefDynamics:
    """Likelihood tables and belief transitions of the filtering model."""

    def __init__(self, quad_nodes: int = DEFAULT_QUAD_NODES):
        self.neutral = NEUTRAL_REACTION.copy()
        self.adversary = np.stack([
            [averaged_adversary_policy(d, a_a, quad_nodes) for a_a in AgentAction]
            for d in range(INITIAL_DISTANCE + 1)
        ])

    @classmethod
    def from_tables(cls, neutral: np.ndarray, adversary: np.ndarray) -> "BeliefDynamics":
        dyn = cls.__new__(cls)
        dyn.neutral = np.asarray(neutral, dtype=float)
        dyn.adversary = np.asarray(adversary, dtype=float)
        return dyn

    def likelihoods(self, d: int, a_a: int) -> tuple[np.ndarray, np.ndarray]:
        """(adversary, neutral) reaction probabilities at one state."""
        return self.adversary[d, a_a], self.neutral[a_a]

    def mixture(self, b, d: int, a_a: int) -> np.ndarray:
        """Predictive reaction probabilities under belief b; shape (..., 2)."""
        b = np.asarray(b, dtype=float)
        l_adv, l_neu = self.likelihoods(d, a_a)
        return b[..., None] * l_adv + (1.0 - b)[..., None] * l_neu

    def posteriors(self, b, d: int, a_a: int) -> np.ndarray:
        """Updated beliefs for each possible reaction; shape (..., 2).

        Matches the scalar filter: certainty is absorbing, interior values
        are kept an epsilon away from the endpoints.
        """
        b = np.asarray(b, dtype=float)
        l_adv, _ = self.likelihoods(d, a_a)
        w = self.mixture(b, d, a_a)
        post = b[..., None] * l_adv / w
        post = np.clip(post, BELIEF_EPS, 1.0 - BELIEF_EPS)
        post = np.where(b[..., None] == 0.0, 0.0, post)
        post = np.where(b[..., None] == 1.0, 1.0, post)
        return post

    def expected_reward(self, b, d: int, a_a: int) -> np.ndarray:
        """Mean one-round reward under belief b: reaction-averaged certainty
        bonus plus the belief-weighted state penalty."""
        b = np.asarray(b, dtype=float)
        w = self.mixture(b, d, a_a)
        ent = binary_entropy(self.posteriors(b, d, a_a))
        penalty = (b * state_reward(Intent.ADVERSARY, a_a)
                   + (1.0 - b) * state_reward(Intent.NEUTRAL, a_a))
        return -(w * ent).sum(axis=-1) + penalty


def uniform_belief_grid(size: int) -> np.ndarray:
    if size < 2:
        raise ValueError("belief grid needs at least 2 points")
    return np.linspace(0.0, 1.0, size)


def feasible_distances(t: int) -> range:
    """Distances reachable at round t from the standard start."""
    return range(max(0, INITIAL_DISTANCE - t), INITIAL_DISTANCE + 1)
