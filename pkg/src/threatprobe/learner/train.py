"""Training loop for the probing agent's soft-Q policy.

Each simulated episode draws the opponent's intent from the prior; neutral
episodes use the fixed reaction table, hostile ones draw a fresh family
member from the hyper-prior. The agent explores with its own current
stochastic policy, transitions go to replay, and after a warmup the
network takes one minibatch gradient step per environment step.
"""
from __future__ import annotations

import math

import numpy as np

from ..env import INITIAL_DISTANCE, NUM_ROUNDS, Intent, run_episode
from ..opponents import GenerativeOpponent, NeutralOpponent, sample_adversary_params
from .nets import init_mlp
from .replay import ReplayBuffer
from .softq import MaxEntAgentPolicy, SoftQLearner, SoftQNet, agent_features

NUM_AGENT_FEATURES = 3


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite loss {loss} at training step {step}")
        self.step = step
        self.loss = loss


def episode_transitions(record) -> list[tuple[np.ndarray, int, float, np.ndarray, bool]]:
    """Flatten an episode into replay rows of the agent's feature space."""
    rows = []
    d_before = INITIAL_DISTANCE
    for t, rr in enumerate(record.rounds):
        feats = agent_features(rr.belief_before, d_before, t)
        next_feats = agent_features(rr.belief_after, rr.distance_after, t + 1)
        terminal = t + 1 == NUM_ROUNDS
        rows.append((feats, int(rr.agent_action), rr.reward, next_feats, terminal))
        d_before = rr.distance_after
    return rows


def train_agent(config, seed: int) -> SoftQNet:
    """Run the full learning pipeline; deterministic given the seed.

    config.train_epochs counts gradient steps. Raises TrainingDiverged if
    the minibatch loss goes non-finite.
    """
    root = np.random.SeedSequence(seed)
    init_ss, env_ss, batch_ss = root.spawn(3)
    rng_env = np.random.default_rng(env_ss)
    rng_batch = np.random.default_rng(batch_ss)

    sizes = [NUM_AGENT_FEATURES, *config.hidden_sizes, 3]
    net = SoftQNet(mlp=init_mlp(sizes, np.random.default_rng(init_ss)), sigma=config.sigma)
    learner = SoftQLearner(net, lr=config.learning_rate, tau=config.target_tau,
                           gamma=config.gamma)
    buffer = ReplayBuffer(config.buffer_capacity, NUM_AGENT_FEATURES)
    policy = MaxEntAgentPolicy(net)

    steps = 0
    while steps < config.train_epochs:
        if rng_env.random() < config.belief_prior:
            intent = Intent.ADVERSARY
            opponent = GenerativeOpponent(sample_adversary_params(rng_env))
        else:
            intent = Intent.NEUTRAL
            opponent = NeutralOpponent()
        record = run_episode(policy, opponent, intent, rng_env, config.belief_prior)
        for row in episode_transitions(record):
            buffer.add(*row)
        if len(buffer) < config.warmup_transitions:
            continue
        for _ in range(NUM_ROUNDS):
            if steps >= config.train_epochs:
                break
            loss = learner.update(buffer.sample(rng_batch, config.batch_size))
            steps += 1
            if not math.isfinite(loss):
                raise TrainingDiverged(steps, loss)
    return net
