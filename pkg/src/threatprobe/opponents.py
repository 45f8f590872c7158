"""Opponent behavior models.

Two hypotheses drive everything downstream: a neutral who reacts to the
probing action with fixed probabilities, and a goal-directed adversary who
trades off closing on the checkpoint against imitating the neutral. The
adversary family has two knobs (rationality temperature alpha, imitation
weight beta), each uniform on [1, 2] under the hyper-prior; the intent
filter uses the family averaged over that prior.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .env import INITIAL_DISTANCE, AgentAction, OpponentAction

# Reaction probabilities of a neutral, indexed [agent action][(stay, proceed)].
NEUTRAL_REACTION = np.array([
    [0.60, 0.40],   # hand signal
    [0.75, 0.25],   # loudspeaker
    [0.90, 0.10],   # flare bang
])

PARAM_LOW = 1.0
PARAM_HIGH = 2.0

DEFAULT_GAMMA_O = 0.95
DEFAULT_QUAD_NODES = 8


def neutral_policy(a_a: AgentAction | int) -> np.ndarray:
    """Reaction distribution of a neutral; depends only on the probing action."""
    return NEUTRAL_REACTION[int(a_a)].copy()


@dataclass(frozen=True)
class AdversaryParams:
    """One member of the adversary family: (rationality, imitation weight)."""
    alpha: float
    beta: float

    def __post_init__(self):
        if not PARAM_LOW <= self.alpha <= PARAM_HIGH:
            raise ValueError(f"alpha {self.alpha} outside [{PARAM_LOW}, {PARAM_HIGH}]")
        if not PARAM_LOW <= self.beta <= PARAM_HIGH:
            raise ValueError(f"beta {self.beta} outside [{PARAM_LOW}, {PARAM_HIGH}]")


def adversary_mdp_reward(d0: int, d: int) -> float:
    """Goal reward for the adversary, growing as it closes on the checkpoint."""
    if d > d0:
        raise ValueError(f"distance {d} exceeds start distance {d0}")
    if d < 0:
        raise ValueError(f"distance {d} negative")
    return 1.1 ** (d0 - d) - 1.0


@dataclass
class AdversaryQTable:
    """Optimal action values of the goal-directed adversary, keyed on distance.

    residuals holds the sup-norm Bellman residual of each value-iteration
    sweep, in order.
    """
    q: np.ndarray                 # (INITIAL_DISTANCE + 1, 2)
    gamma_o: float
    residuals: list[float]


def solve_adversary_q(gamma_o: float = DEFAULT_GAMMA_O, tol: float = 1e-10,
                      d0: int = INITIAL_DISTANCE) -> AdversaryQTable:
    """Infinite-horizon value iteration for the adversary's closing problem.

    Deterministic transitions (stay keeps d, proceed closes one unit,
    clamped at 0); reward collected on the post-move distance. Iterates
    until the sup-norm residual drops below tol.
    """
    if not 0.0 < gamma_o < 1.0:
        raise ValueError(f"gamma_o {gamma_o} outside (0, 1)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")

    n = d0 + 1
    succ = np.empty((n, 2), dtype=int)
    rew = np.empty((n, 2))
    for d in range(n):
        for a in (OpponentAction.STAY, OpponentAction.PROCEED):
            d2 = d if a == OpponentAction.STAY else max(0, d - 1)
            succ[d, a] = d2
            rew[d, a] = adversary_mdp_reward(d0, d2)

    q = np.zeros((n, 2))
    residuals: list[float] = []
    while True:
        v = q.max(axis=1)
        q_new = rew + gamma_o * v[succ]
        residual = float(np.abs(q_new - q).max())
        residuals.append(residual)
        q = q_new
        if residual < tol:
            break
    return AdversaryQTable(q=q, gamma_o=gamma_o, residuals=residuals)


@lru_cache(maxsize=None)
def default_q_table() -> AdversaryQTable:
    return solve_adversary_q()


def soft_rational_policy(q_table: AdversaryQTable, alpha: float, d: int) -> np.ndarray:
    """Boltzmann action choice over the adversary's Q-values at distance d."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    logits = alpha * q_table.q[d]
    logits = logits - logits.max()
    ex = np.exp(logits)
    return ex / ex.sum()


def kl_blend(p_goal: np.ndarray, p_neu: np.ndarray, beta: float) -> np.ndarray:
    """Distribution closest (in KL) to the goal policy while imitating the neutral.

    Minimizes KL(pi|p_goal) + beta*KL(pi|p_neu) over the simplex; the
    stationarity conditions give the normalized geometric interpolation
    pi ~ p_goal^(1/(1+beta)) * p_neu^(beta/(1+beta)).
    """
    if beta < 0.0:
        raise ValueError("beta must be non-negative")
    p_goal = np.asarray(p_goal, dtype=float)
    p_neu = np.asarray(p_neu, dtype=float)
    if np.any(p_goal <= 0.0) or np.any(p_neu <= 0.0):
        raise ValueError("kl_blend requires full-support inputs")
    log_mix = (np.log(p_goal) + beta * np.log(p_neu)) / (1.0 + beta)
    w = np.exp(log_mix - log_mix.max())
    return w / w.sum()


def adversary_policy(d: int, a_a: AgentAction | int, params: AdversaryParams,
                     q_table: AdversaryQTable | None = None) -> np.ndarray:
    """Reaction distribution of one adversary family member.

    The probing action enters only through the imitation term: the neutral
    reacts to it, so imitating the neutral means reacting like one.
    """
    if q_table is None:
        q_table = default_q_table()
    goal = soft_rational_policy(q_table, params.alpha, d)
    return kl_blend(goal, neutral_policy(a_a), params.beta)


def quadrature_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [PARAM_LOW, PARAM_HIGH], weights summing to 1."""
    xi, wi = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (PARAM_HIGH - PARAM_LOW)
    mid = 0.5 * (PARAM_HIGH + PARAM_LOW)
    return mid + half * xi, wi / wi.sum()


@lru_cache(maxsize=None)
def _averaged_table(nodes: int) -> np.ndarray:
    """Family policy averaged over the uniform hyper-prior, tabulated
    per (distance, agent action)."""
    q_table = default_q_table()
    pts, wts = quadrature_nodes(nodes)
    table = np.zeros((INITIAL_DISTANCE + 1, len(AgentAction), len(OpponentAction)))
    for d in range(INITIAL_DISTANCE + 1):
        goals = {a: soft_rational_policy(q_table, a, d) for a in pts}
        for a_a in AgentAction:
            neu = neutral_policy(a_a)
            acc = np.zeros(len(OpponentAction))
            for wa, alpha in zip(wts, pts):
                for wb, beta in zip(wts, pts):
                    acc += wa * wb * kl_blend(goals[alpha], neu, beta)
            table[d, a_a] = acc
    return table


def averaged_adversary_policy(d: int, a_a: AgentAction | int,
                              nodes: int = DEFAULT_QUAD_NODES) -> np.ndarray:
    """Adversary reaction distribution marginalized over the hyper-prior.

    Tensor-product Gauss-Legendre quadrature; the integrand is smooth in
    (alpha, beta), so the default 8x8 grid is effectively exact.
    """
    return _averaged_table(nodes)[d, int(a_a)].copy()


def sample_adversary_params(rng: np.random.Generator) -> AdversaryParams:
    """Draw (alpha, beta) independently uniform from the hyper-prior support."""
    alpha = rng.uniform(PARAM_LOW, PARAM_HIGH)
    beta = rng.uniform(PARAM_LOW, PARAM_HIGH)
    return AdversaryParams(alpha=alpha, beta=beta)


class NeutralOpponent:
    """Episode adapter for the neutral reaction table."""

    def __call__(self, view) -> np.ndarray:
        return neutral_policy(view.agent_action)


class GenerativeOpponent:
    """Episode adapter for one adversary family member."""

    def __init__(self, params: AdversaryParams):
        self.params = params

    def __call__(self, view) -> np.ndarray:
        return adversary_policy(view.distance, view.agent_action, self.params)
