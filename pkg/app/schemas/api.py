from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.balancing.sinr import min_sinr_db
from app.balancing.solver import DownlinkSolution, UplinkAllocation
from app.channels.models import ChannelInstance
from app.schemas.scenario import dbm_to_watts


class InstanceIn(BaseModel):
    """Rows of h_re / h_im are the users' conjugated channels h_k^H."""
    h_re: List[List[float]]
    h_im: List[List[float]]
    sigma2: Optional[List[float]] = Field(None, description="Noise powers in watts; 1 for every user when omitted")
    power_w: Optional[float] = Field(None, gt=0)
    power_dbm: Optional[float] = None

    class Config:
        json_schema_extra = {
            "example": {"h_re": [[1.0, 0.0], [0.0, 1.0]], "h_im": [[0.0, 0.0], [0.0, 0.0]], "power_w": 10.0}
        }

    @model_validator(mode="after")
    def _one_power(self):
        if (self.power_w is None) == (self.power_dbm is None):
            raise ValueError("give exactly one of power_w and power_dbm")
        return self

    def to_instance(self) -> ChannelInstance:
        H = np.asarray(self.h_re, dtype=np.float64) + 1j * np.asarray(self.h_im, dtype=np.float64)
        sigma2 = np.ones(H.shape[0]) if self.sigma2 is None else np.asarray(self.sigma2, dtype=np.float64)
        power = self.power_w if self.power_w is not None else dbm_to_watts(self.power_dbm)
        return ChannelInstance(H=H, sigma2=sigma2, power=power)


class RecoverRequest(BaseModel):
    instance: InstanceIn
    q: List[float] = Field(..., description="Uplink powers in watts")


class DownlinkOut(BaseModel):
    w_re: List[List[float]]
    w_im: List[List[float]]
    p: List[float]
    sinr: List[float]
    min_sinr_db: float
    total_power: float

    @classmethod
    def from_solution(cls, solution: DownlinkSolution) -> "DownlinkOut":
        return cls(
            w_re=solution.W.real.tolist(),
            w_im=solution.W.imag.tolist(),
            p=solution.p.tolist(),
            sinr=solution.sinr.tolist(),
            min_sinr_db=min_sinr_db(solution.sinr),
            total_power=solution.total_power,
        )


class SolveResponse(BaseModel):
    q: List[float]
    balanced_sinr: float
    balanced_sinr_db: float
    iterations: int
    downlink: DownlinkOut

    @classmethod
    def from_result(cls, uplink: UplinkAllocation, downlink: DownlinkSolution) -> "SolveResponse":
        return cls(
            q=uplink.q.tolist(),
            balanced_sinr=uplink.balanced_sinr,
            balanced_sinr_db=float(10.0 * np.log10(uplink.balanced_sinr)),
            iterations=uplink.iterations,
            downlink=DownlinkOut.from_solution(downlink),
        )


class PredictResponse(BaseModel):
    fractions: List[float]
    q: List[float]
    downlink: DownlinkOut
    checkpoint: str
