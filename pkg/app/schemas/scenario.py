import math
from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


class ChannelModel(str, Enum):
    RAYLEIGH = "rayleigh"
    RICIAN = "rician"
    NAKAGAMI = "nakagami"
    LARGE_SCALE = "large-scale"
    WINNER_INDOOR = "winner-indoor"
    WINNER_OUTDOOR = "winner-outdoor"
    V2I_URBAN = "v2i-urban"
    V2I_FREEWAY = "v2i-freeway"


SMALL_SCALE_MODELS = frozenset({ChannelModel.RAYLEIGH, ChannelModel.RICIAN, ChannelModel.NAKAGAMI})
VEHICULAR_MODELS = frozenset({ChannelModel.V2I_URBAN, ChannelModel.V2I_FREEWAY})

# (inner radius m, outer radius m, shadowing std dB) per pathloss scenario.
_GEOMETRY_DEFAULTS = {
    ChannelModel.LARGE_SCALE: (10.0, 500.0, 8.0),
    ChannelModel.WINNER_INDOOR: (10.0, 100.0, 4.0),
    ChannelModel.WINNER_OUTDOOR: (100.0, 1000.0, 3.0),
    # Vehicular distances follow from the road layout; the outer value only bounds the pathloss range.
    ChannelModel.V2I_URBAN: (1.0, 1000.0, 8.0),
    ChannelModel.V2I_FREEWAY: (1.0, 1200.0, 8.0),
}

KMH = 1000.0 / 3600.0


class WinnerB1Constants(BaseModel):
    """
    WINNER II B1 (urban micro) LOS pathloss table, dB and metres.
    Below the breakpoint: slope*log10(d) + intercept + freq_slope*log10(fc/5 GHz).
    Beyond it: far_slope*log10(d) + far_intercept - far_height_slope*(log10 h'_BS + log10 h'_MS)
    + far_freq_slope*log10(fc/5 GHz), with h' = h - effective_height_offset.
    """
    model_config = ConfigDict(extra="forbid")

    slope_db: float = 22.7
    intercept_db: float = 41.0
    freq_slope_db: float = 20.0
    far_slope_db: float = 40.0
    far_intercept_db: float = 9.45
    far_height_slope_db: float = 17.3
    far_freq_slope_db: float = 2.7
    bs_height_m: float = 10.0
    ue_height_m: float = 1.5
    effective_height_offset_m: float = 1.0
    shadowing_std_db: float = 3.0
    far_shadowing_std_db: float = 3.0


class ScenarioConfig(BaseModel):
    """
    Everything needed to regenerate a channel population deterministically.
    Field names are the stable JSON interface.
    """
    model_config = ConfigDict(extra="forbid")

    channel_model: ChannelModel
    num_antennas: int = Field(4, ge=1, description="M, BS antennas")
    num_users: int = Field(4, ge=1, description="K, single-antenna users")
    carrier_frequency_hz: float = Field(2.9e9, gt=0)
    bandwidth_hz: float = Field(20e6, gt=0)
    noise_psd_dbm_hz: float = -174.0
    noise_power_dbm: Optional[float] = Field(
        None, description="Overrides noise_psd + 10log10(bandwidth) when set"
    )
    power_dbm: float = 25.0

    rician_factor: float = Field(3.0, ge=0, description="Linear K-factor")
    nakagami_m: float = Field(5.0, ge=0.5)
    nakagami_omega: float = Field(2.0, gt=0)
    n_walls: int = Field(1, ge=1)

    cell_radius_m: Optional[float] = Field(None, gt=0)
    inner_radius_m: Optional[float] = Field(None, gt=0)
    shadowing_std_db: Optional[float] = Field(None, ge=0)
    decorrelation_distance_m: float = Field(50.0, ge=0)

    velocity_mps: Optional[float] = Field(None, ge=0)
    bs_antenna_gain_dbi: float = 8.0
    ue_antenna_gain_dbi: float = 3.0
    turn_probability: float = Field(0.4, ge=0, le=1)
    lanes_per_direction: Optional[int] = Field(None, ge=1)
    lane_width_m: float = Field(3.5, gt=0)
    freeway_length_m: float = Field(2000.0, gt=0)
    bs_road_distance_m: float = Field(35.0, gt=0)
    slot_duration_s: float = Field(1e-3, gt=0, description="Spacing of Clarke-correlated samples")

    winner_b1: WinnerB1Constants = Field(default_factory=WinnerB1Constants)
    seed: int = Field(0, ge=0)

    @field_validator("inner_radius_m")
    @classmethod
    def _inner_below_outer(cls, v, info):
        outer = info.data.get("cell_radius_m")
        if v is not None and outer is not None and v >= outer:
            raise ValueError("inner_radius_m must be smaller than cell_radius_m")
        return v

    @property
    def is_small_scale(self) -> bool:
        return self.channel_model in SMALL_SCALE_MODELS

    @property
    def is_vehicular(self) -> bool:
        return self.channel_model in VEHICULAR_MODELS

    @property
    def placement_range(self) -> Tuple[float, float]:
        """(inner, outer) user distance in metres for pathloss scenarios."""
        inner, outer, _ = _GEOMETRY_DEFAULTS.get(self.channel_model, (0.0, float("inf"), 0.0))
        return (
            self.inner_radius_m if self.inner_radius_m is not None else inner,
            self.cell_radius_m if self.cell_radius_m is not None else outer,
        )

    @property
    def shadowing_std(self) -> float:
        if self.shadowing_std_db is not None:
            return self.shadowing_std_db
        if self.channel_model == ChannelModel.WINNER_OUTDOOR:
            return self.winner_b1.shadowing_std_db
        return _GEOMETRY_DEFAULTS.get(self.channel_model, (0.0, 0.0, 0.0))[2]

    @property
    def velocity(self) -> float:
        if self.velocity_mps is not None:
            return self.velocity_mps
        if self.channel_model == ChannelModel.V2I_FREEWAY:
            return 120.0 * KMH
        if self.channel_model == ChannelModel.V2I_URBAN:
            return 60.0 * KMH
        return 0.0

    @property
    def lanes(self) -> int:
        if self.lanes_per_direction is not None:
            return self.lanes_per_direction
        return 3 if self.channel_model == ChannelModel.V2I_FREEWAY else 2

    @property
    def noise_dbm(self) -> float:
        if self.noise_power_dbm is not None:
            return self.noise_power_dbm
        return self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz)

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    @property
    def power_w(self) -> float:
        return dbm_to_watts(self.power_dbm)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)
