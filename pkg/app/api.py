import asyncio
import logging
from functools import lru_cache

import numpy as np
from fastapi import APIRouter, HTTPException

from app.adapt.evaluate import network_predictor
from app.balancing.solver import recover_downlink, solve_balancing
from app.config import settings
from app.datasets.records import canonicalize
from app.errors import (
    BeamformingError,
    CorruptPayload,
    DegenerateInstance,
    DimensionMismatch,
    NoConvergence,
    NotPositiveDefinite,
    VersionMismatch,
)
from app.net.checkpoint import Checkpoint, load_checkpoint
from app.net.scaler import fractions_to_powers
from app.schemas.api import DownlinkOut, InstanceIn, PredictResponse, RecoverRequest, SolveResponse

logger = logging.getLogger(__name__)

router = APIRouter()


def _http_error(exc: BeamformingError) -> HTTPException:
    if isinstance(exc, (NoConvergence, NotPositiveDefinite)):
        return HTTPException(status_code=422, detail=f"{type(exc).__name__}: {exc}")
    return HTTPException(status_code=400, detail=f"{type(exc).__name__}: {exc}")


@lru_cache(maxsize=4)
def _checkpoint(path: str) -> Checkpoint:
    return load_checkpoint(path)


def served_checkpoint() -> Checkpoint:
    """The model behind /v1/predict; 503 while none is configured or it cannot be read."""
    path = settings.CHECKPOINT_PATH
    if not path:
        raise HTTPException(status_code=503, detail="No checkpoint configured. Set CHECKPOINT_PATH.")
    try:
        return _checkpoint(path)
    except (OSError, CorruptPayload, VersionMismatch) as e:
        logger.warning("cannot load checkpoint %s: %s", path, e)
        raise HTTPException(status_code=503, detail=f"Checkpoint unavailable: {e}")


@router.get("/", include_in_schema=False)
async def root():
    return {"message": "Max-min SINR beamforming service. See /docs for API"}


@router.post("/v1/solve", response_model=SolveResponse, tags=["solver"])
async def solve_endpoint(payload: InstanceIn):
    """
    Optimal max-min SINR beamforming for one instance:
    uplink power allocation, balanced SINR and the recovered downlink beamformers.
    """
    try:
        instance = payload.to_instance()
        loop = asyncio.get_event_loop()
        uplink, downlink = await loop.run_in_executor(None, solve_balancing, instance)
    except BeamformingError as e:
        raise _http_error(e)
    return SolveResponse.from_result(uplink, downlink)


@router.post("/v1/recover", response_model=DownlinkOut, tags=["solver"])
async def recover_endpoint(payload: RecoverRequest):
    """Downlink beamformers achieving the uplink SINRs of the given power vector q."""
    try:
        instance = payload.instance.to_instance()
        downlink = recover_downlink(instance, np.asarray(payload.q, dtype=np.float64))
    except BeamformingError as e:
        raise _http_error(e)
    return DownlinkOut.from_solution(downlink)


@router.post("/v1/predict", response_model=PredictResponse, tags=["network"])
async def predict_endpoint(payload: InstanceIn):
    """
    Network prediction followed by downlink recovery. The instance is noise-normalized first,
    so the returned q belongs to the unit-noise instance; beamformers and SINRs are unchanged by it.
    """
    ckpt = served_checkpoint()
    try:
        instance = canonicalize(payload.to_instance())
        if (instance.num_antennas, instance.num_users) != (ckpt.network.num_antennas, ckpt.network.num_users):
            raise DimensionMismatch(
                f"checkpoint serves M={ckpt.network.num_antennas}, K={ckpt.network.num_users}; "
                f"got M={instance.num_antennas}, K={instance.num_users}"
            )
        if not np.isclose(instance.power, ckpt.power_w, rtol=1e-9):
            raise DegenerateInstance(f"checkpoint was trained for P={ckpt.power_w:.6g} W, got {instance.power:.6g} W")
        fractions = network_predictor(ckpt.model, ckpt.params, ckpt.buffers, ckpt.scaler)([instance])[0]
        q = fractions_to_powers(fractions, instance.power)
        downlink = recover_downlink(instance, q)
    except BeamformingError as e:
        raise _http_error(e)
    return PredictResponse(
        fractions=np.asarray(fractions).tolist(),
        q=q.tolist(),
        downlink=DownlinkOut.from_solution(downlink),
        checkpoint=settings.CHECKPOINT_PATH,
    )
