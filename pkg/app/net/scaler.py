from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
import torch

from app.channels.models import ChannelInstance
from app.net.model import DTYPE


def stack_channels(instances: Sequence[ChannelInstance]) -> np.ndarray:
    return np.stack([inst.H for inst in instances])


@dataclass(frozen=True)
class InputScaler:
    """Standardizes the real and imaginary input planes with statistics frozen from a training pool."""
    mean_re: float = 0.0
    std_re: float = 1.0
    mean_im: float = 0.0
    std_im: float = 1.0

    @classmethod
    def fit(cls, instances: Sequence[ChannelInstance]) -> "InputScaler":
        H = stack_channels(instances)
        std_re, std_im = float(H.real.std()), float(H.imag.std())
        return cls(
            mean_re=float(H.real.mean()),
            std_re=std_re if std_re > 0 else 1.0,
            mean_im=float(H.imag.mean()),
            std_im=std_im if std_im > 0 else 1.0,
        )

    def transform(self, instances: Sequence[ChannelInstance]) -> torch.Tensor:
        """(N, 2, K, M) float64 network input."""
        H = stack_channels(instances)
        planes = np.stack([(H.real - self.mean_re) / self.std_re, (H.imag - self.mean_im) / self.std_im], axis=1)
        return torch.from_numpy(np.ascontiguousarray(planes)).to(DTYPE)

    def to_dict(self) -> Dict[str, float]:
        return {"mean_re": self.mean_re, "std_re": self.std_re, "mean_im": self.mean_im, "std_im": self.std_im}

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "InputScaler":
        return cls(**{k: float(data[k]) for k in ("mean_re", "std_re", "mean_im", "std_im")})


def fractions_to_powers(fractions: np.ndarray, power: float) -> np.ndarray:
    """q_hat = P * s / ||s||_1 row-wise, so every prediction spends the full budget."""
    s = np.asarray(fractions, dtype=np.float64)
    return power * s / s.sum(axis=-1, keepdims=True)
