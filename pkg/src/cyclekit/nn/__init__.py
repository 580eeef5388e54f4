"""Differentiable part of the pipeline, in plain numpy with hand-written gradients."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, gradient_check
from .model import CycleModel, Instance, NonFiniteError, Prediction, bce_loss, prepare_instance
from .optim import Adam
from .params import ModelConfig, init_params

__all__ = [
    "Adam", "CheckpointError", "CycleModel", "GradCheckReport", "Instance", "ModelConfig",
    "NonFiniteError", "Prediction", "bce_loss", "gradient_check", "init_params",
    "load_checkpoint", "prepare_instance", "save_checkpoint",
]
