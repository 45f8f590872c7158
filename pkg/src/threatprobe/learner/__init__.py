from .nets import Mlp, init_mlp, clone_mlp, mlp_forward, mlp_forward_batch, mlp_backward_batch
from .optim import Adam
from .replay import Batch, ReplayBuffer
from .softq import (
    MaxEntAgentPolicy,
    SoftQLearner,
    SoftQNet,
    TargetNetwork,
    Transition,
    agent_features,
    ema_update,
    forward,
    make_target,
    soft_policy,
    soft_value,
    td_target,
    td_targets_batch,
)
from .train import TrainingDiverged, train_agent
from .model_io import ModelFormatError, load_model, save_model, dump_model

__all__ = [
    "Adam", "Batch", "MaxEntAgentPolicy", "Mlp", "ModelFormatError",
    "ReplayBuffer", "SoftQLearner", "SoftQNet", "TargetNetwork", "Transition",
    "TrainingDiverged", "agent_features", "clone_mlp", "dump_model",
    "ema_update", "forward", "init_mlp", "load_model", "make_target",
    "mlp_backward_batch", "mlp_forward", "mlp_forward_batch", "save_model",
    "soft_policy", "soft_value", "td_target", "td_targets_batch", "train_agent",
]
