"""Shared fixtures and independent oracle helpers.

The oracle functions here deliberately avoid the package's own closed-form
paths: the blend oracle minimizes the divergence objective numerically, and
the gradient oracle uses central finite differences.
"""
from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from scipy import optimize

from threatprobe.config import ExperimentConfig


@pytest.fixture(scope="session")
def tiny_config() -> ExperimentConfig:
    """Budgets small enough for unit tests; scenario values untouched."""
    return dataclasses.replace(
        ExperimentConfig(),
        train_epochs=400,
        warmup_transitions=100,
        adversary_epochs=300,
        eval_episodes=100,
        adversary_seeds=2,
        belief_grid_size=101,
    )


def blend_objective(pi0: float, p_goal: np.ndarray, p_neu: np.ndarray, beta: float) -> float:
    """KL(pi|p_goal) + beta * KL(pi|p_neu) on the binary simplex."""
    pi = np.array([pi0, 1.0 - pi0])
    return float(np.sum(pi * np.log(pi / p_goal)) + beta * np.sum(pi * np.log(pi / p_neu)))


def blend_oracle(p_goal: np.ndarray, p_neu: np.ndarray, beta: float) -> np.ndarray:
    """Direct numeric minimization of the blend objective (binary actions)."""
    res = optimize.minimize_scalar(
        blend_objective, bounds=(1e-12, 1.0 - 1e-12), args=(p_goal, p_neu, beta),
        method="bounded", options={"xatol": 1e-12})
    return np.array([res.x, 1.0 - res.x])


def finite_difference_grad(loss_fn, flat: np.ndarray, coords: np.ndarray,
                           h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function at selected coordinates."""
    out = np.empty(len(coords))
    for k, i in enumerate(coords):
        up = flat.copy()
        up[i] += h
        down = flat.copy()
        down[i] -= h
        out[k] = (loss_fn(up) - loss_fn(down)) / (2.0 * h)
    return out
