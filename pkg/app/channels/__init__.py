"""
Channel generators for every training and testing scenario.
"""

from app.channels.doppler import clarke_fading, doppler_hz
from app.channels.mobility import MANHATTAN, ManhattanGrid, freeway_step, mobility_step, physical_position
from app.channels.models import ChannelInstance, Heading, VehicleState
from app.channels.pathloss import pathloss_db
from app.channels.scenarios import ScenarioSource, VehicularTrack, draw_instance
from app.channels.shadowing import shadowing_track
from app.channels.smallscale import smallscale_sample

__all__ = [
    "ChannelInstance",
    "Heading",
    "MANHATTAN",
    "ManhattanGrid",
    "ScenarioSource",
    "VehicleState",
    "VehicularTrack",
    "clarke_fading",
    "doppler_hz",
    "draw_instance",
    "freeway_step",
    "mobility_step",
    "pathloss_db",
    "physical_position",
    "shadowing_track",
    "smallscale_sample",
]
