"""Checkpoint threat discrimination toolkit.

Simulates a probing agent deciding how aggressively to challenge an
oncoming opponent of unknown intent: generative adversary models, a
Bayesian intent filter, an entropy-regularized Q-learning agent, a
chance-constrained planning baseline, and a stress-test harness against
adversaries the models never saw.
"""

__version__ = "0.1.0"

from .env import (
    AgentAction,
    DISCOUNT,
    EpisodeRecord,
    INITIAL_DISTANCE,
    Intent,
    NUM_ROUNDS,
    OpponentAction,
    RoundRecord,
    WorldState,
    run_episode,
    state_reward,
    step_distance,
)
from .opponents import (
    AdversaryParams,
    AdversaryQTable,
    adversary_mdp_reward,
    adversary_policy,
    averaged_adversary_policy,
    kl_blend,
    neutral_policy,
    sample_adversary_params,
    soft_rational_policy,
    solve_adversary_q,
)
from .beliefs import belief_entropy, belief_update, hybrid_reward
from .config import ConfigError, ExperimentConfig, config_hash, load_config

__all__ = [
    "AgentAction", "AdversaryParams", "AdversaryQTable", "ConfigError",
    "DISCOUNT", "EpisodeRecord", "ExperimentConfig", "INITIAL_DISTANCE",
    "Intent", "NUM_ROUNDS", "OpponentAction", "RoundRecord", "WorldState",
    "adversary_mdp_reward", "adversary_policy", "averaged_adversary_policy",
    "belief_entropy", "belief_update", "config_hash", "hybrid_reward",
    "kl_blend", "load_config", "neutral_policy", "run_episode",
    "sample_adversary_params", "soft_rational_policy", "solve_adversary_q",
    "state_reward", "step_distance",
]
