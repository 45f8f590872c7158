"""Chance-constrained belief-grid baseline.

Finite-horizon backward induction over (round, distance, belief) where the
bootstrapped part of each backup is discounted by how uncertain the
reaction model is: the per-entry reaction probabilities are treated as
uncorrelated Gaussians around the nominal model, making the mixture-
weighted successor value a Gaussian whose lower (1-epsilon) quantile is
maximized. Successor beliefs always use the nominal probabilities, which
keeps the constrained quantity linear in the perturbations and the
quantile analytic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .beliefgrid import BeliefDynamics, feasible_distances, uniform_belief_grid
from .env import DISCOUNT, INITIAL_DISTANCE, NUM_ROUNDS, AgentAction, WorldState

FORMAT_NAME = "threatprobe-ccpolicy"
FORMAT_VERSION = 1


class PolicyFormatError(ValueError):
    pass


@dataclass(frozen=True)
class UncertaintyModel:
    """Gaussian uncertainty around the nominal reaction probabilities."""
    mean_neutral: np.ndarray    # (actions, reactions)
    mean_adversary: np.ndarray  # (distances, actions, reactions)
    variance: float
    epsilon: float

    def __post_init__(self):
        if self.variance < 0.0:
            raise ValueError("variance must be non-negative")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")

    @property
    def z_quantile(self) -> float:
        """Standard normal quantile at 1 - epsilon."""
        return NormalDist().inv_cdf(1.0 - self.epsilon)

    @staticmethod
    def nominal(variance: float = 0.001, epsilon: float = 0.05,
                quad_nodes: int | None = None,
                dynamics: BeliefDynamics | None = None) -> "UncertaintyModel":
        dyn = dynamics or (BeliefDynamics(quad_nodes) if quad_nodes else BeliefDynamics())
        return UncertaintyModel(mean_neutral=dyn.neutral, mean_adversary=dyn.adversary,
                                variance=variance, epsilon=epsilon)


@dataclass
class BeliefGrid:
    """Solved value/action tables on the uniform belief grid.

    values[t, d, i] is the optimum at round t, distance d, belief grid[i];
    actions holds the corresponding argmax (-1 where (d, t) is unreachable).
    values is None for tables reloaded from a policy file.
    """
    grid: np.ndarray
    actions: np.ndarray          # (rounds, distances, n) int8
    values: np.ndarray | None    # (rounds + 1, distances, n)
    epsilon: float
    variance: float
    gamma: float

    @property
    def grid_size(self) -> int:
        return len(self.grid)


def _check_feasible(d: int, t: int) -> None:
    if not 0 <= t < NUM_ROUNDS:
        raise ValueError(f"round {t} outside [0, {NUM_ROUNDS - 1}]")
    if not INITIAL_DISTANCE - t <= d <= INITIAL_DISTANCE:
        raise ValueError(f"distance {d} unreachable at round {t}")


def _dynamics_of(model: UncertaintyModel) -> BeliefDynamics:
    return BeliefDynamics.from_tables(model.mean_neutral, model.mean_adversary)


def cc_backup(b: float, d: int, t: int, v_next, model: UncertaintyModel,
              gamma: float = DISCOUNT) -> tuple[float, AgentAction]:
    """One chance-constrained backup at a single belief point.

    v_next(belief, distance) must return the round-(t+1) value; it is only
    called for t < NUM_ROUNDS - 1. Returns the best score and its action,
    ties broken toward the lowest action index.
    """
    _check_feasible(d, t)
    dyn = _dynamics_of(model)
    z = model.z_quantile
    best_score, best_action = -math.inf, None
    for a_a in AgentAction:
        reward = float(dyn.expected_reward(float(b), d, a_a))
        if t + 1 < NUM_ROUNDS:
            w = dyn.mixture(float(b), d, a_a)
            post = dyn.posteriors(float(b), d, a_a)
            succ = (d, max(0, d - 1))
            vals = np.array([float(v_next(post[a_o], succ[a_o])) for a_o in (0, 1)])
            mu = gamma * float(w @ vals)
            var_w = model.variance * (b * b + (1.0 - b) * (1.0 - b))
            sigma_x = gamma * math.sqrt(var_w * float(vals @ vals))
            v_tilde = mu - z * sigma_x
        else:
            v_tilde = 0.0
        score = reward + v_tilde
        if score > best_score:
            best_score, best_action = score, a_a
    return best_score, best_action


def solve(model: UncertaintyModel, grid_size: int = 201,
          gamma: float = DISCOUNT) -> BeliefGrid:
    """Backward induction over all feasible (round, distance, belief) cells.

    Vectorized across the belief axis; agrees with cc_backup pointwise.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    dyn = _dynamics_of(model)
    grid = uniform_belief_grid(grid_size)
    z = model.z_quantile
    n_d = INITIAL_DISTANCE + 1

    values = np.full((NUM_ROUNDS + 1, n_d, grid_size), np.nan)
    actions = np.full((NUM_ROUNDS, n_d, grid_size), -1, dtype=np.int8)
    for d in feasible_distances(NUM_ROUNDS):
        values[NUM_ROUNDS, d] = 0.0

    for t in range(NUM_ROUNDS - 1, -1, -1):
        for d in feasible_distances(t):
            succ = (d, max(0, d - 1))
            scores = np.empty((grid_size, len(AgentAction)))
            for a_a in AgentAction:
                w = dyn.mixture(grid, d, a_a)
                post = dyn.posteriors(grid, d, a_a)
                reward = dyn.expected_reward(grid, d, a_a)
                v0 = np.interp(post[:, 0], grid, values[t + 1, succ[0]])
                v1 = np.interp(post[:, 1], grid, values[t + 1, succ[1]])
                mu = gamma * (w[:, 0] * v0 + w[:, 1] * v1)
                var_w = model.variance * (grid * grid + (1.0 - grid) * (1.0 - grid))
                sigma_x = gamma * np.sqrt(var_w * (v0 * v0 + v1 * v1))
                scores[:, a_a] = reward + mu - z * sigma_x
            actions[t, d] = np.argmax(scores, axis=1)
            values[t, d] = scores[np.arange(grid_size), actions[t, d]]
    return BeliefGrid(grid=grid, actions=actions, values=values,
                      epsilon=model.epsilon, variance=model.variance, gamma=gamma)


def cc_policy(grid: BeliefGrid, b: float, d: int, t: int) -> AgentAction:
    """Deterministic action lookup, belief snapped to the nearest grid point."""
    _check_feasible(d, t)
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"belief {b} outside [0, 1]")
    idx = int(round(b * (grid.grid_size - 1)))
    return AgentAction(int(grid.actions[t, d, idx]))


def mc_chance_value(b: float, d: int, t: int, a_a: AgentAction | int,
                    v_next, model: UncertaintyModel, n_draws: int,
                    rng: np.random.Generator, clamp: bool = False,
                    gamma: float = DISCOUNT) -> float:
    """Monte Carlo estimate of the bootstrapped value threshold.

    Draws reaction-probability tables from the Gaussian uncertainty and
    returns the empirical epsilon-quantile of the discounted mixture-
    weighted successor value. clamp=True additionally projects each drawn
    table back onto [0, 1] and renormalizes (cross-check mode; the analytic
    path never renormalizes).
    """
    _check_feasible(d, t)
    dyn = _dynamics_of(model)
    l_adv, l_neu = dyn.likelihoods(d, int(a_a))
    post = dyn.posteriors(float(b), d, int(a_a))
    succ = (d, max(0, d - 1))
    vals = np.array([float(v_next(post[a_o], succ[a_o])) for a_o in (0, 1)])

    sd = math.sqrt(model.variance)
    adv_s = l_adv + rng.normal(0.0, sd, size=(n_draws, 2))
    neu_s = l_neu + rng.normal(0.0, sd, size=(n_draws, 2))
    if clamp:
        adv_s = np.clip(adv_s, 0.0, 1.0)
        neu_s = np.clip(neu_s, 0.0, 1.0)
        adv_s /= adv_s.sum(axis=1, keepdims=True)
        neu_s /= neu_s.sum(axis=1, keepdims=True)
    w_s = b * adv_s + (1.0 - b) * neu_s
    x = gamma * (w_s @ vals)
    return float(np.quantile(x, model.epsilon))


def uses_flare(grid: BeliefGrid) -> bool:
    """Whether the extracted deterministic policy ever reaches for the flare."""
    return bool(np.any(grid.actions == int(AgentAction.FLARE)))


class CCAgentPolicy:
    """Episode adapter: deterministic action as a one-hot distribution."""

    def __init__(self, grid: BeliefGrid):
        self.grid = grid

    def __call__(self, belief: float, state: WorldState) -> np.ndarray:
        probs = np.zeros(len(AgentAction))
        probs[int(cc_policy(self.grid, belief, state.distance, state.round))] = 1.0
        return probs


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dump_policy(grid: BeliefGrid, metadata: dict[str, str]) -> str:
    lines = [f"{FORMAT_NAME} {FORMAT_VERSION}"]
    meta = dict(metadata)
    meta.update(grid_size=str(grid.grid_size), epsilon=_fmt(grid.epsilon),
                variance=_fmt(grid.variance), gamma=_fmt(grid.gamma))
    for key in sorted(meta):
        lines.append(f"meta {key} {meta[key]}")
    for t in range(NUM_ROUNDS):
        for d in feasible_distances(t):
            row = " ".join(str(int(a)) for a in grid.actions[t, d])
            lines.append(f"actions {t} {d} {row}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_policy(path, grid: BeliefGrid, metadata: dict[str, str]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dump_policy(grid, metadata))


def parse_policy(text: str) -> tuple[BeliefGrid, dict[str, str]]:
    lines = text.splitlines()
    if not lines or lines[0].split() != [FORMAT_NAME, str(FORMAT_VERSION)]:
        raise PolicyFormatError("not a recognizable policy file")
    meta: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and lines[pos].startswith("meta "):
        _, key, value = lines[pos].split(" ", 2)
        meta[key] = value
        pos += 1
    for key in ("grid_size", "epsilon", "variance", "gamma"):
        if key not in meta:
            raise PolicyFormatError(f"missing {key} metadata")
    size = int(meta["grid_size"])
    actions = np.full((NUM_ROUNDS, INITIAL_DISTANCE + 1, size), -1, dtype=np.int8)
    while pos < len(lines) and lines[pos].startswith("actions "):
        parts = lines[pos].split()
        t, d = int(parts[1]), int(parts[2])
        row = np.array(parts[3:], dtype=np.int8)
        if row.size != size:
            raise PolicyFormatError(f"bad action row length at t={t} d={d}")
        actions[t, d] = row
        pos += 1
    if pos >= len(lines) or lines[pos] != "end":
        raise PolicyFormatError("missing end marker")
    grid = BeliefGrid(grid=uniform_belief_grid(size), actions=actions, values=None,
                      epsilon=float(meta["epsilon"]), variance=float(meta["variance"]),
                      gamma=float(meta["gamma"]))
    return grid, meta


def load_policy(path) -> tuple[BeliefGrid, dict[str, str]]:
    with open(path, "r", encoding="ascii") as fh:
        return parse_policy(fh.read())
