from app.schemas.experiment import (
    AdaptExperiment,
    EvalExperiment,
    GenDataExperiment,
    OnlineExperiment,
    SplitExperiment,
    SweepConfig,
    TasksExperiment,
    TrainExperiment,
)
from app.schemas.scenario import ChannelModel, ScenarioConfig, WinnerB1Constants, dbm_to_watts
from app.schemas.schedule import ScheduleConfig, Segment
from app.schemas.training import NetworkConfig, TrainConfig

__all__ = [
    "AdaptExperiment",
    "ChannelModel",
    "EvalExperiment",
    "GenDataExperiment",
    "NetworkConfig",
    "OnlineExperiment",
    "ScenarioConfig",
    "ScheduleConfig",
    "Segment",
    "SplitExperiment",
    "SweepConfig",
    "TasksExperiment",
    "TrainConfig",
    "TrainExperiment",
    "WinnerB1Constants",
    "dbm_to_watts",
]
