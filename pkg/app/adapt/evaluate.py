import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np
import torch

from app.balancing import recover_downlink
from app.channels.models import ChannelInstance
from app.config import settings
from app.datasets.records import SamplePair
from app.net.model import BeamformingCNN, Params
from app.net.scaler import InputScaler, fractions_to_powers

logger = logging.getLogger(__name__)

# fractions of the power budget, one row per instance
Predictor = Callable[[Sequence[ChannelInstance]], np.ndarray]


def network_predictor(model: BeamformingCNN, params: Params, buffers: Params, scaler: InputScaler) -> Predictor:
    def predict(instances: Sequence[ChannelInstance]) -> np.ndarray:
        with torch.no_grad():
            return model(params, scaler.transform(instances), buffers, mode="eval").numpy()
    return predict


def label_predictor(pairs: Sequence[SamplePair]) -> Predictor:
    """Feeds the stored optimal labels back in place of a network."""
    lookup = {id(p.instance): p.label for p in pairs}

    def predict(instances: Sequence[ChannelInstance]) -> np.ndarray:
        return np.stack([lookup[id(inst)] for inst in instances])
    return predict


@dataclass
class EvalReport:
    min_sinr: np.ndarray
    optimal_min_sinr: np.ndarray
    ms_per_channel: float = 0.0
    rows: List[dict] = field(default_factory=list)

    @property
    def mean_min_sinr_db(self) -> float:
        return float(10.0 * np.log10(np.mean(self.min_sinr)))

    @property
    def optimal_mean_min_sinr_db(self) -> float:
        return float(10.0 * np.log10(np.mean(self.optimal_min_sinr)))

    @property
    def ratios(self) -> np.ndarray:
        return self.min_sinr / self.optimal_min_sinr

    @property
    def mean_ratio(self) -> float:
        return float(np.mean(self.ratios))

    def summary(self) -> dict:
        return {
            "count": int(self.min_sinr.shape[0]),
            "mean_min_sinr_db": self.mean_min_sinr_db,
            "optimal_mean_min_sinr_db": self.optimal_mean_min_sinr_db,
            "mean_ratio_to_optimal": self.mean_ratio,
            "ms_per_channel": self.ms_per_channel if settings.RECORD_TIMINGS else 0.0,
        }


def evaluate(predictor: Predictor, test: Sequence[SamplePair]) -> EvalReport:
    """
    predict -> q_hat = P * s / ||s||_1 -> recover_downlink -> min SINR, against the stored
    optimal label of every test pair.
    """
    if not test:
        raise ValueError("test set is empty")
    instances = [p.instance for p in test]
    start = time.perf_counter()
    fractions = predictor(instances)
    achieved = np.empty(len(test))
    for i, inst in enumerate(instances):
        q_hat = fractions_to_powers(fractions[i], inst.power)
        achieved[i] = recover_downlink(inst, q_hat).min_sinr
    elapsed_ms = (time.perf_counter() - start) * 1000.0 / len(test)

    optimal = np.array([recover_downlink(p.instance, p.q).min_sinr for p in test])
    report = EvalReport(
        min_sinr=achieved,
        optimal_min_sinr=optimal,
        ms_per_channel=elapsed_ms,
    )
    report.rows = [
        {"index": i, "min_sinr_db": float(10 * np.log10(a)), "optimal_min_sinr_db": float(10 * np.log10(o)),
         "ratio": float(a / o)}
        for i, (a, o) in enumerate(zip(achieved, optimal))
    ]
    logger.info("evaluated %d channels: %.3f dB (optimal %.3f dB)",
                len(test), report.mean_min_sinr_db, report.optimal_mean_min_sinr_db)
    return report
