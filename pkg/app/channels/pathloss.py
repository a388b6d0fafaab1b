"""
Distance-dependent pathloss per scenario, in dB. Distances are metres.
"""
import math

from app.errors import NonPositiveDistance, OutOfRange, UnknownModel
from app.schemas.scenario import ChannelModel, ScenarioConfig, WinnerB1Constants

SPEED_OF_LIGHT = 3e8


def _macro_db(d_m: float) -> float:
    return 128.1 + 37.6 * math.log10(d_m / 1000.0)


def _indoor_db(d_m: float, fc_hz: float, n_walls: int) -> float:
    # A1 corridor-to-room NLOS
    return 43.8 + 36.8 * math.log10(d_m) + 20.0 * math.log10(fc_hz / 5e9) + 5.0 * (n_walls - 1)


def b1_breakpoint_m(table: WinnerB1Constants, fc_hz: float) -> float:
    h_bs = table.bs_height_m - table.effective_height_offset_m
    h_ms = table.ue_height_m - table.effective_height_offset_m
    return 4.0 * h_bs * h_ms * fc_hz / SPEED_OF_LIGHT


def _b1_los_db(d_m: float, fc_hz: float, table: WinnerB1Constants) -> float:
    f_term = math.log10(fc_hz / 5e9)
    if d_m <= b1_breakpoint_m(table, fc_hz):
        return table.slope_db * math.log10(d_m) + table.intercept_db + table.freq_slope_db * f_term
    h_bs = table.bs_height_m - table.effective_height_offset_m
    h_ms = table.ue_height_m - table.effective_height_offset_m
    return (
        table.far_slope_db * math.log10(d_m)
        + table.far_intercept_db
        - table.far_height_slope_db * (math.log10(h_bs) + math.log10(h_ms))
        + table.far_freq_slope_db * f_term
    )


def pathloss_db(model, d: float, params: ScenarioConfig) -> float:
    """Pathloss for a user at distance d; d must lie in the scenario's placement range."""
    try:
        model = ChannelModel(model)
    except ValueError as exc:
        raise UnknownModel(f"unknown scenario {model!r}") from exc
    if model in (ChannelModel.RAYLEIGH, ChannelModel.RICIAN, ChannelModel.NAKAGAMI):
        raise UnknownModel(f"{model.value} has no pathloss model")
    if d <= 0:
        raise NonPositiveDistance(f"distance must be positive, got {d}")
    inner, outer = params.placement_range
    if not inner <= d <= outer:
        raise OutOfRange(f"d={d:.3f} m outside [{inner}, {outer}] m for {model.value}")

    if model == ChannelModel.WINNER_INDOOR:
        return _indoor_db(d, params.carrier_frequency_hz, params.n_walls)
    if model == ChannelModel.WINNER_OUTDOOR:
        return _b1_los_db(d, params.carrier_frequency_hz, params.winner_b1)
    # large-scale and both vehicular layouts share the macro-cell law
    return _macro_db(d)


def shadowing_std_at(config: ScenarioConfig, d: float) -> float:
    """B1 uses a different deviation beyond the breakpoint; every other scenario has one value."""
    if config.channel_model == ChannelModel.WINNER_OUTDOOR and config.shadowing_std_db is None:
        table = config.winner_b1
        if d > b1_breakpoint_m(table, config.carrier_frequency_hz):
            return table.far_shadowing_std_db
    return config.shadowing_std
