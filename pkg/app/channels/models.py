from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Tuple

import numpy as np

from app.errors import DimensionMismatch


@dataclass(frozen=True)
class ChannelInstance:
    """
    One problem instance.
    H holds the users' conjugated channels as rows (row k is h_k^H), so H @ w_k gives h_k^H w_k.
    sigma2 and power are linear watts.
    """
    H: np.ndarray
    sigma2: np.ndarray
    power: float

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.complex128)
        sigma2 = np.asarray(self.sigma2, dtype=np.float64).reshape(-1)
        if H.ndim != 2:
            raise DimensionMismatch(f"H must be K x M, got shape {H.shape}")
        if sigma2.shape[0] != H.shape[0]:
            raise DimensionMismatch(f"sigma2 has {sigma2.shape[0]} entries for {H.shape[0]} users")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(sigma2)) and np.isfinite(self.power)):
            raise ValueError("instance has non-finite entries")
        if np.any(sigma2 <= 0) or self.power <= 0:
            raise ValueError("noise powers and power budget must be positive")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "power", float(self.power))

    @property
    def num_users(self) -> int:
        return self.H.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.H.shape[1]

    def channel(self, k: int) -> np.ndarray:
        """h_k as a column vector (length M)."""
        return self.H[k].conj()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "h_re": self.H.real.tolist(),
            "h_im": self.H.imag.tolist(),
            "sigma2": self.sigma2.tolist(),
            "power_w": self.power,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ChannelInstance":
        H = np.asarray(data["h_re"], dtype=np.float64) + 1j * np.asarray(data["h_im"], dtype=np.float64)
        K = H.shape[0]
        sigma2 = data.get("sigma2", [1.0] * K)
        return cls(H=H, sigma2=np.asarray(sigma2, dtype=np.float64), power=float(data["power_w"]))


class Heading(str, Enum):
    N = "N"
    S = "S"
    E = "E"
    W = "W"

    @property
    def vector(self) -> Tuple[float, float]:
        return _DIRECTIONS[self]

    @property
    def reverse(self) -> "Heading":
        return _REVERSE[self]

    @property
    def turns(self) -> Tuple["Heading", "Heading"]:
        """(left, right) for right-hand traffic."""
        return _TURNS[self]


_DIRECTIONS = {Heading.N: (0.0, 1.0), Heading.S: (0.0, -1.0), Heading.E: (1.0, 0.0), Heading.W: (-1.0, 0.0)}
_REVERSE = {Heading.N: Heading.S, Heading.S: Heading.N, Heading.E: Heading.W, Heading.W: Heading.E}
_TURNS = {
    Heading.N: (Heading.W, Heading.E),
    Heading.S: (Heading.E, Heading.W),
    Heading.E: (Heading.N, Heading.S),
    Heading.W: (Heading.S, Heading.N),
}


@dataclass(frozen=True)
class VehicleState:
    """
    position is on the road centre line; the lane offset is applied by `physical_position`
    in the mobility module, so the centre-line position always stays inside the layout.
    """
    position: Tuple[float, float]
    heading: Heading
    lane: int
    velocity: float
