"""
Offline trainers, evaluation and the online adaptation loop.
"""

from app.adapt.evaluate import EvalReport, evaluate, label_predictor, network_predictor
from app.adapt.offline import (
    TrainResult,
    fine_tune,
    meta_adapt,
    meta_gradient,
    meta_train,
    pretrain,
    train_joint,
)
from app.adapt.online import (
    STRATEGIES,
    OnlineMetaState,
    OnlineReport,
    SlotBuffer,
    ftl_update,
    online_meta_step,
    run_schedule,
)
from app.adapt.sweep import adaptation_sweep

__all__ = [
    "EvalReport",
    "OnlineMetaState",
    "OnlineReport",
    "STRATEGIES",
    "SlotBuffer",
    "TrainResult",
    "adaptation_sweep",
    "evaluate",
    "fine_tune",
    "ftl_update",
    "label_predictor",
    "meta_adapt",
    "meta_gradient",
    "meta_train",
    "network_predictor",
    "online_meta_step",
    "pretrain",
    "run_schedule",
    "train_joint",
]
