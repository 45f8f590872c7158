"""Experiment configuration: defaults, file loading, validation, hashing.

Config files are flat JSON objects; every key must be a known field and
every value must pass the type/range checks below, so a typo'd
hyperparameter fails loudly instead of silently running the defaults.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .env import DISCOUNT, INITIAL_DISTANCE, NUM_ROUNDS


class ConfigError(ValueError):
    """Invalid configuration file or field value."""


@dataclass(frozen=True)
class ExperimentConfig:
    # scenario
    initial_distance: int = INITIAL_DISTANCE
    num_rounds: int = NUM_ROUNDS
    gamma: float = DISCOUNT
    belief_prior: float = 0.5
    # soft-Q learner
    learning_rate: float = 5e-4
    batch_size: int = 50
    buffer_capacity: int = 1_000_000
    train_epochs: int = 100_000
    warmup_transitions: int = 1000
    target_tau: float = 0.01
    sigma: float = 0.25
    hidden_sizes: tuple[int, ...] = (64, 128, 64)
    # chance-constrained baseline
    cc_epsilon: float = 0.05
    cc_variance: float = 0.001
    belief_grid_size: int = 201
    # opponent family
    quadrature_nodes: int = 8
    nominal_alpha: float = 1.5
    nominal_beta: float = 1.5
    # evaluation sweeps
    eta_start: float = 0.0
    eta_stop: float = 5.0
    eta_step: float = 0.25
    bthre_start: float = 0.0
    bthre_stop: float = 0.5
    bthre_step: float = 0.025
    adversary_seeds: int = 10
    adversary_epochs: int = 100_000
    eval_episodes: int = 10_000

    def __post_init__(self):
        checks = [
            (self.initial_distance == INITIAL_DISTANCE,
             f"initial_distance must be {INITIAL_DISTANCE} (only the canonical scenario is supported)"),
            (self.num_rounds == NUM_ROUNDS,
             f"num_rounds must be {NUM_ROUNDS} (only the canonical scenario is supported)"),
            (0.0 < self.gamma < 1.0, "gamma must be in (0, 1)"),
            (0.0 <= self.belief_prior <= 1.0, "belief_prior must be in [0, 1]"),
            (self.learning_rate > 0.0, "learning_rate must be positive"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.buffer_capacity >= 1, "buffer_capacity must be >= 1"),
            (self.train_epochs >= 1, "train_epochs must be >= 1"),
            (self.warmup_transitions >= 1, "warmup_transitions must be >= 1"),
            (0.0 < self.target_tau <= 1.0, "target_tau must be in (0, 1]"),
            (self.sigma > 0.0, "sigma must be positive"),
            (len(self.hidden_sizes) >= 1 and all(h >= 1 for h in self.hidden_sizes),
             "hidden_sizes must be a non-empty list of positive ints"),
            (0.0 < self.cc_epsilon < 1.0, "cc_epsilon must be in (0, 1)"),
            (self.cc_variance >= 0.0, "cc_variance must be non-negative"),
            (self.belief_grid_size >= 2, "belief_grid_size must be >= 2"),
            (self.quadrature_nodes >= 1, "quadrature_nodes must be >= 1"),
            (1.0 <= self.nominal_alpha <= 2.0, "nominal_alpha must be in [1, 2]"),
            (1.0 <= self.nominal_beta <= 2.0, "nominal_beta must be in [1, 2]"),
            (self.eta_step > 0.0, "eta_step must be positive"),
            (self.eta_stop >= self.eta_start >= 0.0, "eta range must satisfy 0 <= start <= stop"),
            (self.bthre_step > 0.0, "bthre_step must be positive"),
            (0.0 <= self.bthre_start <= self.bthre_stop <= 0.5,
             "bthre range must satisfy 0 <= start <= stop <= 0.5"),
            (self.adversary_seeds >= 1, "adversary_seeds must be >= 1"),
            (self.adversary_epochs >= 1, "adversary_epochs must be >= 1"),
            (self.eval_episodes >= 1, "eval_episodes must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def eta_grid(self) -> np.ndarray:
        return _grid(self.eta_start, self.eta_stop, self.eta_step)

    def bthre_grid(self) -> np.ndarray:
        return _grid(self.bthre_start, self.bthre_stop, self.bthre_step)


def _grid(start: float, stop: float, step: float) -> np.ndarray:
    count = int(round((stop - start) / step)) + 1
    values = start + step * np.arange(count)
    return values[values <= stop + 1e-12]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
_INT_FIELDS = {name for name, t in _FIELD_TYPES.items() if t == "int"}
_FLOAT_FIELDS = {name for name, t in _FIELD_TYPES.items() if t == "float"}


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a flat JSON object")
    kwargs = {}
    for key, value in data.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        if key in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key {key!r} must be an integer")
            kwargs[key] = value
        elif key in _FLOAT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {key!r} must be a number")
            kwargs[key] = float(value)
        else:  # hidden_sizes
            if (not isinstance(value, list) or not value
                    or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
                raise ConfigError(f"config key {key!r} must be a list of integers")
            kwargs[key] = tuple(value)
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(config: ExperimentConfig) -> dict:
    data = dataclasses.asdict(config)
    data["hidden_sizes"] = list(data["hidden_sizes"])
    return data


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
