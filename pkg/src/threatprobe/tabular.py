"""Tabular soft-value reference on the belief-discretized checkpoint problem.

Discretizes the belief axis, keeps the exact averaged-model transition
probabilities, and runs synchronous log-sum-exp backups to the fixed point.
The converged table is the ground truth the network learner is sanity
checked against.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beliefgrid import BeliefDynamics, feasible_distances, uniform_belief_grid
from .env import DISCOUNT, INITIAL_DISTANCE, NUM_ROUNDS, AgentAction
from .learner.softq import soft_policy, soft_value


@dataclass
class TabularSoftQ:
    grid: np.ndarray            # (n,) belief points
    q: np.ndarray               # (rounds, distances, n, actions); NaN where unreachable
    sigma: float
    gamma: float
    residuals: list[float] = field(default_factory=list)

    def q_at(self, b: float, d: int, t: int) -> np.ndarray:
        """Q-row at the nearest belief grid point."""
        idx = int(round(b * (len(self.grid) - 1)))
        return self.q[t, d, idx]

    def policy_at(self, b: float, d: int, t: int) -> np.ndarray:
        return soft_policy(self.q_at(b, d, t), self.sigma)


def solve_tabular_soft_q(grid_size: int = 201, sigma: float = 0.25,
                         gamma: float = DISCOUNT, tol: float = 1e-9,
                         max_sweeps: int = 500,
                         dynamics: BeliefDynamics | None = None) -> TabularSoftQ:
    """Iterate the soft backup to convergence on the discretized problem.

    Synchronous sweeps over all (round, distance, belief) cells; successor
    values are linearly interpolated on the belief grid. The sup-norm
    residual contracts at least geometrically with ratio gamma, and the
    finite horizon makes it hit zero after one sweep per round.
    """
    dyn = dynamics or BeliefDynamics()
    grid = uniform_belief_grid(grid_size)
    n_d = INITIAL_DISTANCE + 1
    n_a = len(AgentAction)

    # Per (d, a_a): mixture weights, posteriors, expected one-round reward.
    mix = np.zeros((n_d, n_a, grid_size, 2))
    post = np.zeros((n_d, n_a, grid_size, 2))
    rew = np.zeros((n_d, n_a, grid_size))
    for d in range(n_d):
        for a_a in range(n_a):
            mix[d, a_a] = dyn.mixture(grid, d, a_a)
            post[d, a_a] = dyn.posteriors(grid, d, a_a)
            rew[d, a_a] = dyn.expected_reward(grid, d, a_a)

    q = np.full((NUM_ROUNDS, n_d, grid_size, n_a), np.nan)
    for t in range(NUM_ROUNDS):
        for d in feasible_distances(t):
            q[t, d] = 0.0

    residuals: list[float] = []
    for _ in range(max_sweeps):
        v = soft_value(q, sigma)              # (rounds, distances, n)
        q_new = np.full_like(q, np.nan)
        for t in range(NUM_ROUNDS):
            for d in feasible_distances(t):
                succ = (d, max(0, d - 1))     # successor distance per reaction
                for a_a in range(n_a):
                    backup = rew[d, a_a].copy()
                    if t + 1 < NUM_ROUNDS:
                        for a_o in (0, 1):
                            v_next = np.interp(post[d, a_a, :, a_o], grid,
                                               v[t + 1, succ[a_o]])
                            backup += gamma * mix[d, a_a, :, a_o] * v_next
                    q_new[t, d, :, a_a] = backup
        residual = float(np.nanmax(np.abs(q_new - q)))
        residuals.append(residual)
        q = q_new
        if residual < tol:
            break
    return TabularSoftQ(grid=grid, q=q, sigma=sigma, gamma=gamma, residuals=residuals)
