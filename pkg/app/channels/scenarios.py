"""
Composes placement, pathloss, shadowing, antenna gains and fading into ChannelInstances.
"""
import logging
from typing import List, Sequence, Tuple

import numpy as np

from app.channels.doppler import clarke_fading
from app.channels.mobility import (
    MANHATTAN,
    freeway_step,
    mobility_step,
    physical_position,
    random_freeway_vehicle,
    random_vehicle,
)
from app.channels.models import ChannelInstance, VehicleState
from app.channels.pathloss import pathloss_db, shadowing_std_at
from app.channels.shadowing import ar1_update
from app.channels.smallscale import rayleigh, smallscale_sample
from app.numerics import RandomStream
from app.schemas.scenario import ChannelModel, ScenarioConfig

logger = logging.getLogger(__name__)

# substream keys
_PLACEMENT, _SHADOW, _FADING, _MOBILITY, _IID = 0, 1, 2, 3, 4


def _annulus_distances(rng: np.random.Generator, K: int, inner: float, outer: float) -> np.ndarray:
    u = rng.uniform(size=K)
    return np.sqrt(u * (outer * outer - inner * inner) + inner * inner)


def _bs_position(config: ScenarioConfig) -> Tuple[float, float]:
    if config.channel_model == ChannelModel.V2I_FREEWAY:
        return config.freeway_length_m / 2.0, config.bs_road_distance_m
    return MANHATTAN.centre


def _place_vehicles(config: ScenarioConfig, rng: np.random.Generator) -> List[VehicleState]:
    if config.channel_model == ChannelModel.V2I_FREEWAY:
        return [
            random_freeway_vehicle(rng, config.velocity, config.lanes, config.freeway_length_m)
            for _ in range(config.num_users)
        ]
    return [random_vehicle(rng, config.velocity, config.lanes) for _ in range(config.num_users)]


def _vehicle_distances(config: ScenarioConfig, vehicles: Sequence[VehicleState]) -> np.ndarray:
    bx, by = _bs_position(config)
    inner, outer = config.placement_range
    out = []
    for v in vehicles:
        x, y = physical_position(v, config.lane_width_m)
        out.append(float(np.clip(np.hypot(x - bx, y - by), inner, outer)))
    return np.asarray(out)


def _gain_amplitudes(config: ScenarioConfig, distances: np.ndarray, shadow_db: np.ndarray) -> np.ndarray:
    """sqrt of linear large-scale gain per user."""
    pl = np.array([pathloss_db(config.channel_model, float(d), config) for d in distances])
    gain_db = -pl - shadow_db
    if config.is_vehicular:
        gain_db = gain_db + config.bs_antenna_gain_dbi + config.ue_antenna_gain_dbi
    return np.sqrt(10.0 ** (gain_db / 10.0))


def _noise(config: ScenarioConfig) -> np.ndarray:
    return np.full(config.num_users, config.noise_w)


def draw_instance(config: ScenarioConfig, stream: RandomStream) -> ChannelInstance:
    """One independent instance of the scenario; identical streams give identical instances."""
    M, K = config.num_antennas, config.num_users
    if config.is_small_scale:
        H = smallscale_sample(config.channel_model, M, K, config, stream.substream(_FADING))
        return ChannelInstance(H=H, sigma2=_noise(config), power=config.power_w)

    placement = stream.substream(_PLACEMENT).generator()
    if config.is_vehicular:
        distances = _vehicle_distances(config, _place_vehicles(config, placement))
        fading = clarke_fading(config.velocity, config.carrier_frequency_hz, [0.0], M, K,
                               stream.substream(_FADING))[0]
    else:
        inner, outer = config.placement_range
        distances = _annulus_distances(placement, K, inner, outer)
        fading = rayleigh(stream.substream(_FADING).generator(), (K, M))

    z = stream.substream(_SHADOW).generator().standard_normal(K)
    shadow = np.array([shadowing_std_at(config, float(d)) for d in distances]) * z
    amp = _gain_amplitudes(config, distances, shadow)
    return ChannelInstance(H=amp[:, None] * fading, sigma2=_noise(config), power=config.power_w)


class VehicularTrack:
    """
    K vehicles moving through a vehicular layout.
    Shadowing evolves as AR(1) along each vehicle's path and small-scale fading follows one
    Clarke process per user, so samples taken close in time are correlated.
    """

    def __init__(self, config: ScenarioConfig, stream: RandomStream):
        if not config.is_vehicular:
            raise ValueError(f"{config.channel_model.value} is not a vehicular scenario")
        self.config = config
        self.stream = stream
        self.vehicles = _place_vehicles(config, stream.substream(_PLACEMENT).generator())
        self.time_s = 0.0
        self._moves = 0
        self._fading_stream = stream.substream(_FADING)
        distances = _vehicle_distances(config, self.vehicles)
        z = stream.substream(_SHADOW, 0).generator().standard_normal(config.num_users)
        self.shadow_db = np.array([shadowing_std_at(config, float(d)) for d in distances]) * z

    def positions(self) -> List[Tuple[float, float]]:
        return [physical_position(v, self.config.lane_width_m) for v in self.vehicles]

    def advance(self, dt: float) -> None:
        """Move every vehicle and update its shadowing by the distance travelled."""
        cfg = self.config
        self._moves += 1
        before = np.asarray(self.positions())
        moved = []
        for k, v in enumerate(self.vehicles):
            if cfg.channel_model == ChannelModel.V2I_FREEWAY:
                moved.append(freeway_step(v, dt, cfg.freeway_length_m))
            else:
                moved.append(mobility_step(v, dt, cfg.turn_probability,
                                           self.stream.substream(_MOBILITY, self._moves, k)))
        self.vehicles = moved
        after = np.asarray(self.positions())
        steps = np.linalg.norm(after - before, axis=1)
        z = self.stream.substream(_SHADOW, self._moves).generator().standard_normal(cfg.num_users)
        distances = _vehicle_distances(cfg, self.vehicles)
        self.shadow_db = np.array([
            ar1_update(self.shadow_db[k], steps[k], shadowing_std_at(cfg, float(distances[k])),
                       cfg.decorrelation_distance_m, z[k])
            for k in range(cfg.num_users)
        ])
        self.time_s += dt

    def sample(self, count: int, start: int = 0) -> List[ChannelInstance]:
        """`count` instances spaced one slot duration apart, beginning `start` slot durations after now."""
        cfg = self.config
        times = self.time_s + (start + np.arange(count)) * cfg.slot_duration_s
        fading = clarke_fading(cfg.velocity, cfg.carrier_frequency_hz, times,
                               cfg.num_antennas, cfg.num_users, self._fading_stream)
        amp = _gain_amplitudes(cfg, _vehicle_distances(cfg, self.vehicles), self.shadow_db)
        return [
            ChannelInstance(H=amp[:, None] * fading[t], sigma2=_noise(cfg), power=cfg.power_w)
            for t in range(count)
        ]


class ScenarioSource:
    """
    Draws per-slot instances for one schedule segment.
    Vehicular scenarios use a VehicularTrack; the rest draw i.i.d. with one stream id per instance.
    """

    def __init__(self, config: ScenarioConfig, stream: RandomStream, mobility_dt_s: float = 1.0):
        self.config = config
        self.stream = stream
        self.mobility_dt_s = mobility_dt_s
        self.track = VehicularTrack(config, stream) if config.is_vehicular else None
        self._drawn = 0
        self._cursor = 0

    def draw(self, count: int) -> List[ChannelInstance]:
        if self.track is not None:
            batch = self.track.sample(count, start=self._cursor)
            self._cursor += count
            return batch
        out = []
        for _ in range(count):
            out.append(draw_instance(self.config, self.stream.substream(_IID, self._drawn)))
            self._drawn += 1
        return out

    def next_slot(self) -> None:
        self._cursor = 0
        if self.track is not None:
            self.track.advance(self.mobility_dt_s)
        logger.debug("scenario %s advanced", self.config.channel_model.value)
