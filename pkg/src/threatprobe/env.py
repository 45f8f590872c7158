"""Checkpoint world model: actions, rewards, distance dynamics, episode engine.

An opponent starts 12 unit-distances from a checkpoint and the two agents
alternate for 10 rounds, the probing agent acting first. The opponent's
hidden intent (neutral vs adversary) is what the probing agent is trying
to pin down.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

INITIAL_DISTANCE = 12
NUM_ROUNDS = 10
DISCOUNT = 0.95


class AgentAction(IntEnum):
    HAND = 0
    LOUDSPEAKER = 1
    FLARE = 2


class OpponentAction(IntEnum):
    STAY = 0
    PROCEED = 1


class Intent(IntEnum):
    NEUTRAL = 0
    ADVERSARY = 1


# Per-action penalty when the opponent is neutral; hostile column is all
# zeros (nothing is "wasted" on a true adversary). Indexed [action][intent].
STATE_REWARD = np.array([
    [-0.1, 0.0],   # hand signal
    [-0.3, 0.0],   # loudspeaker
    [-0.7, 0.0],   # flare bang
])


def state_reward(intent: Intent | int, a_a: AgentAction | int) -> float:
    return float(STATE_REWARD[a_a, intent])


def step_distance(d: int, a_o: OpponentAction | int) -> int:
    """Advance the opponent one round: stay keeps d, proceed closes one unit.

    Clamped at the checkpoint (d=0), though that is unreachable from the
    standard start in 10 rounds.
    """
    if not 0 <= d <= INITIAL_DISTANCE:
        raise ValueError(f"distance {d} outside [0, {INITIAL_DISTANCE}]")
    if a_o == OpponentAction.STAY:
        return d
    return max(0, d - 1)


@dataclass(frozen=True)
class WorldState:
    """Observable world state: opponent distance and round index."""
    distance: int
    round: int

    def __post_init__(self):
        if not 0 <= self.distance <= INITIAL_DISTANCE:
            raise ValueError(f"distance {self.distance} outside [0, {INITIAL_DISTANCE}]")
        if not 0 <= self.round <= NUM_ROUNDS:
            raise ValueError(f"round {self.round} outside [0, {NUM_ROUNDS}]")
        if self.distance < INITIAL_DISTANCE - self.round:
            raise ValueError(
                f"distance {self.distance} unreachable by round {self.round}")


@dataclass(frozen=True)
class OpponentView:
    """Everything an opponent model may condition on for one reaction."""
    belief: float
    distance: int
    round: int
    agent_action: AgentAction


@dataclass(frozen=True)
class RoundRecord:
    belief_before: float
    agent_action: AgentAction
    opponent_action: OpponentAction
    belief_after: float
    distance_after: int
    reward: float


@dataclass(frozen=True)
class EpisodeRecord:
    intent: Intent
    rounds: tuple[RoundRecord, ...]
    final_belief: float
    discounted_return: float


def sample_index(rng: np.random.Generator, probs: np.ndarray) -> int:
    """Inverse-CDF draw from a probability vector; stable across numpy versions."""
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, len(probs) - 1)


def run_episode(agent_policy, opponent_policy, intent: Intent,
                rng, belief_prior: float = 0.5) -> EpisodeRecord:
    """Simulate one 10-round interaction.

    agent_policy(belief, WorldState) and opponent_policy(OpponentView) both
    return probability vectors over their action sets. Each round the agent
    acts, the opponent reacts, the distance steps, and the intent belief is
    Bayes-updated once. The round reward is the post-update entropy penalty
    plus the state-dependent penalty for the action just taken.

    Deterministic given the rng seed and the two policies.
    """
    from .beliefs import belief_update, hybrid_reward

    rng = np.random.default_rng(rng)
    b = belief_prior
    d = INITIAL_DISTANCE
    rounds = []
    ret = 0.0
    for t in range(NUM_ROUNDS):
        probs_a = agent_policy(b, WorldState(d, t))
        a_a = AgentAction(sample_index(rng, probs_a))
        probs_o = opponent_policy(OpponentView(b, d, t, a_a))
        a_o = OpponentAction(sample_index(rng, probs_o))
        d_next = step_distance(d, a_o)
        b_next = belief_update(b, d, a_a, a_o)
        r = hybrid_reward(b_next, intent, a_a)
        rounds.append(RoundRecord(b, a_a, a_o, b_next, d_next, r))
        ret += DISCOUNT ** t * r
        b, d = b_next, d_next
    return EpisodeRecord(intent, tuple(rounds), b, ret)


class UniformAgentPolicy:
    """Baseline agent that probes uniformly at random."""

    def __call__(self, belief: float, state: WorldState) -> np.ndarray:
        return np.full(len(AgentAction), 1.0 / len(AgentAction))
