"""
The power-fraction CNN, its differentiable training primitives and checkpoint files.
"""

from app.net.checkpoint import Checkpoint, inspect_checkpoint, load_checkpoint, save_checkpoint
from app.net.model import FC_NAMES, BeamformingCNN, Params, parameter_count
from app.net.ops import adam_step, detach_params, grad, make_adam, mse_loss, sgd_step
from app.net.scaler import InputScaler, fractions_to_powers

__all__ = [
    "BeamformingCNN",
    "Checkpoint",
    "FC_NAMES",
    "InputScaler",
    "Params",
    "adam_step",
    "detach_params",
    "fractions_to_powers",
    "grad",
    "inspect_checkpoint",
    "load_checkpoint",
    "make_adam",
    "mse_loss",
    "parameter_count",
    "save_checkpoint",
    "sgd_step",
]
