"""Entropy-regularized Q-learning primitives.

The soft state value is the temperature-scaled log-sum-exp of the action
values; the induced stochastic policy is the corresponding Boltzmann
distribution. Targets bootstrap through a slow-moving copy of the network.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..env import INITIAL_DISTANCE, NUM_ROUNDS, WorldState
from .nets import Mlp, clone_mlp, mlp_forward, mlp_forward_batch, mlp_backward_batch
from .optim import Adam
from .replay import Batch


@dataclass
class SoftQNet:
    """Q-value network plus its entropy temperature."""
    mlp: Mlp
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")

    @property
    def num_actions(self) -> int:
        return self.mlp.layer_sizes[-1]


@dataclass
class TargetNetwork:
    """Exponential-moving-average copy of an online network."""
    net: SoftQNet
    tau: float

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")


def make_target(online: SoftQNet, tau: float) -> TargetNetwork:
    return TargetNetwork(net=SoftQNet(mlp=clone_mlp(online.mlp), sigma=online.sigma), tau=tau)


def ema_update(target: TargetNetwork, online: SoftQNet) -> None:
    """target <- (1 - tau) * target + tau * online, parameter-wise."""
    tau = target.tau
    for pt, po in zip(target.net.mlp.params(), online.mlp.params()):
        pt *= 1.0 - tau
        pt += tau * po


def forward(net: SoftQNet, features: np.ndarray) -> np.ndarray:
    """Q-values for one feature vector."""
    return mlp_forward(net.mlp, features)


def soft_value(q_values: np.ndarray, sigma: float) -> float | np.ndarray:
    """sigma * log sum_a exp(q_a / sigma), max-subtracted for stability.

    Accepts a single q-vector or a (batch, actions) array.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    q = np.asarray(q_values, dtype=float)
    m = q.max(axis=-1, keepdims=True)
    out = m[..., 0] + sigma * np.log(np.sum(np.exp((q - m) / sigma), axis=-1))
    return float(out) if q.ndim == 1 else out


def soft_policy(q_values: np.ndarray, sigma: float) -> np.ndarray:
    """Boltzmann policy exp((q - soft_value(q)) / sigma); rows sum to 1."""
    q = np.asarray(q_values, dtype=float)
    v = soft_value(q, sigma)
    p = np.exp((q - np.expand_dims(v, -1) if q.ndim > 1 else q - v) / sigma)
    return p / p.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class Transition:
    features: np.ndarray
    action: int
    reward: float
    next_features: np.ndarray
    terminal: bool


def td_target(transition: Transition, target_net: TargetNetwork, gamma: float) -> float:
    """Bootstrapped soft backup: r + gamma * V_soft(next) unless terminal."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must be in (0, 1)")
    if transition.terminal:
        return float(transition.reward)
    q_next = forward(target_net.net, transition.next_features)
    return float(transition.reward + gamma * soft_value(q_next, target_net.net.sigma))


def td_targets_batch(batch: Batch, target_net: TargetNetwork, gamma: float) -> np.ndarray:
    q_next = mlp_forward_batch(target_net.net.mlp, batch.next_features)
    v_next = soft_value(q_next, target_net.net.sigma)
    return batch.rewards + gamma * v_next * ~batch.terminal


class SoftQLearner:
    """One online/target network pair plus its optimizer.

    update() performs a single L1-regression step of the online Q towards
    the bootstrapped targets, then nudges the target network.
    """

    def __init__(self, net: SoftQNet, lr: float, tau: float, gamma: float):
        self.online = net
        self.target = make_target(net, tau)
        self.gamma = gamma
        params = net.mlp.params()
        self.adam = Adam([p.shape for p in params], lr=lr)

    def update(self, batch: Batch) -> float:
        """Returns the mean absolute TD error of the minibatch."""
        targets = td_targets_batch(batch, self.target, self.gamma)
        q_all, cache = mlp_forward_batch(self.online.mlp, batch.features, return_cache=True)
        n = len(batch.actions)
        rows = np.arange(n)
        err = q_all[rows, batch.actions] - targets
        loss = float(np.abs(err).mean())
        grad_out = np.zeros_like(q_all)
        grad_out[rows, batch.actions] = np.sign(err) / n
        grads_w, grads_b = mlp_backward_batch(self.online.mlp, cache, grad_out)
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        self.adam.step(self.online.mlp.params(), grads)
        ema_update(self.target, self.online)
        return loss


def agent_features(belief: float, distance: int, round_index: int) -> np.ndarray:
    """Network input for the probing agent: (belief, scaled distance, scaled round)."""
    return np.array([belief, distance / INITIAL_DISTANCE, round_index / NUM_ROUNDS])


class MaxEntAgentPolicy:
    """Stochastic probing policy induced by a soft-Q network.

    greedy=True collapses to the argmax action (diagnostics only; the
    stochasticity is the point in normal use).
    """

    def __init__(self, net: SoftQNet, greedy: bool = False):
        self.net = net
        self.greedy = greedy

    def __call__(self, belief: float, state: WorldState) -> np.ndarray:
        q = forward(self.net, agent_features(belief, state.distance, state.round))
        if self.greedy:
            probs = np.zeros(len(q))
            probs[int(np.argmax(q))] = 1.0
            return probs
        return soft_policy(q, self.net.sigma)
