from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class NetworkConfig(BaseModel):
    """Layout of the 11-layer convolutional regressor: conv-BN-ReLU twice, flatten, FC, Sigmoid."""
    model_config = ConfigDict(extra="forbid")

    num_antennas: int = Field(..., ge=1)
    num_users: int = Field(..., ge=1)
    channels: int = Field(8, ge=1, description="Feature maps per conv layer")
    kernel_size: Literal[1, 3] = 3
    input_layout: Literal["2xKxM"] = "2xKxM"
    bn_eps: float = Field(1e-5, gt=0)
    bn_momentum: float = Field(0.1, gt=0, le=1)
    activations: Tuple[Literal["relu"], Literal["relu"], Literal["sigmoid"]] = ("relu", "relu", "sigmoid")


class TrainConfig(BaseModel):
    """
    Hyperparameters shared by the offline and online trainers.
    alpha is the outer / cross-task / pre-training rate, beta the inner and adaptation rate.
    """
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(0.001, gt=0)
    beta: float = Field(0.01, gt=0)
    batch_size: int = Field(20, ge=1, description="N_b: samples per step, tasks per meta-batch")
    inner_steps: int = Field(20, ge=0, description="G_in; 0 only for the reduction check")
    adapt_steps: int = Field(20, ge=0, description="G_Ad")
    joint_optimizer: Literal["adam", "sgd"] = "adam"
    outer_optimizer: Literal["adam", "sgd"] = "adam"
    first_order: bool = Field(False, description="Drop the gradient-through-gradient term")
    seed: int = Field(0, ge=0)

    max_epochs: int = Field(200, ge=1)
    max_steps: Optional[int] = Field(None, ge=1, description="Hard cap on optimizer steps")
    patience: int = Field(10, ge=1, description="Epochs without min_delta improvement before stopping")
    min_delta: float = Field(1e-5, ge=0)
    val_fraction: float = Field(0.1, ge=0, lt=1)
    meta_plateau_window: int = Field(50, ge=1, description="Outer steps in the running query-loss mean")
