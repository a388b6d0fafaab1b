"""
Exact max-min SINR beamforming and the recovery pipeline for predicted powers.
"""

from app.balancing.sinr import downlink_sinr, min_sinr_db, mmse_filters, uplink_sinr
from app.balancing.solver import (
    DownlinkSolution,
    UplinkAllocation,
    downlink_matrix,
    recover_downlink,
    solve_balancing,
    uplink_matrix,
)

__all__ = [
    "DownlinkSolution",
    "UplinkAllocation",
    "downlink_matrix",
    "downlink_sinr",
    "min_sinr_db",
    "mmse_filters",
    "recover_downlink",
    "solve_balancing",
    "uplink_matrix",
    "uplink_sinr",
]
