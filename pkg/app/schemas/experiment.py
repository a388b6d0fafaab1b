"""
Per-command experiment documents. Each CLI command validates its merged config (file + flags)
against one of these and echoes the result into its outputs.
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.schemas.scenario import ScenarioConfig
from app.schemas.schedule import ScheduleConfig
from app.schemas.training import TrainConfig


class _Experiment(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(..., ge=0)


class GenDataExperiment(_Experiment):
    scenario: ScenarioConfig
    count: int = Field(..., ge=1)
    out: str
    workers: Optional[int] = Field(None, ge=1)


class SplitExperiment(_Experiment):
    scenario: ScenarioConfig
    n_adapt: int = Field(20, ge=1)
    n_test: int = Field(5000, ge=1)
    out_adapt: str
    out_test: str
    workers: Optional[int] = Field(None, ge=1)


class TasksExperiment(_Experiment):
    data: List[str] = Field(..., min_length=1)
    num_tasks: int = Field(1500, ge=1)
    n_support: int = Field(50, ge=1)
    n_query: int = Field(50, ge=1)
    out: str


class NetworkOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    channels: int = Field(8, ge=1)
    kernel_size: Literal[1, 3] = 3


class TrainExperiment(_Experiment):
    method: Literal["joint", "pretrain", "meta"]
    data: List[str] = Field(..., min_length=1)
    tasks: Optional[str] = Field(None, description="Saved task index; built from `data` when absent")
    num_tasks: int = Field(1500, ge=1)
    n_support: int = Field(50, ge=1)
    n_query: int = Field(50, ge=1)
    train: TrainConfig = Field(default_factory=TrainConfig)
    network: NetworkOverrides = Field(default_factory=NetworkOverrides)
    out: str
    metrics: Optional[str] = None
    workers: Optional[int] = Field(None, ge=1)


class AdaptExperiment(_Experiment):
    method: Literal["finetune", "meta-adapt"]
    checkpoint: str
    adapt_data: str
    train: TrainConfig = Field(default_factory=TrainConfig)
    out: str
    metrics: Optional[str] = None


class SweepConfig(BaseModel):
    """Adaptation-sample sweep: SINR after adapting on the first n records, for each n."""
    model_config = ConfigDict(extra="forbid")

    adapt_data: str
    sizes: List[int] = Field(default_factory=lambda: [1, 5, 10, 20])
    pretrain_checkpoint: Optional[str] = None
    meta_checkpoint: Optional[str] = None
    train: TrainConfig = Field(default_factory=TrainConfig)

    @field_validator("sizes")
    @classmethod
    def _positive(cls, v):
        if not v or any(n < 1 for n in v):
            raise ValueError("sweep sizes must be positive")
        return v


class EvalExperiment(_Experiment):
    checkpoint: Optional[str] = None
    test_data: str
    report: str
    use_labels: bool = Field(False, description="Score the stored optimal labels instead of a network")
    sweep: Optional[SweepConfig] = None


class OnlineExperiment(_Experiment):
    schedule: ScheduleConfig
    strategies: List[Literal["online-meta", "online-joint", "offline-meta-periodic", "offline-upper-bound"]] = Field(
        default_factory=lambda: ["online-meta", "online-joint", "offline-meta-periodic", "offline-upper-bound"],
        min_length=1,
    )
    meta_checkpoint: str
    train: TrainConfig = Field(default_factory=TrainConfig)
    report: str
    segments_report: Optional[str] = None
    workers: Optional[int] = Field(None, ge=1)
