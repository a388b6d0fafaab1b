"""
Checkpoint file: one header JSON line (version, config, scaler, manifest of names, shapes and
offsets), then every tensor as little-endian float64 in manifest order.
"""
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import torch

from app.errors import CorruptPayload, VersionMismatch
from app.net.model import BeamformingCNN, Params
from app.net.scaler import InputScaler
from app.schemas.training import NetworkConfig

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    network: NetworkConfig
    params: Params
    buffers: Params
    scaler: InputScaler
    power_w: float
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def model(self) -> BeamformingCNN:
        return BeamformingCNN(self.network)


def _manifest(params: Params, buffers: Params):
    entries, offset = [], 0
    for kind, tensors in (("param", params), ("buffer", buffers)):
        for name, t in tensors.items():
            size = int(t.numel())
            entries.append({"name": name, "kind": kind, "shape": list(t.shape), "offset": offset})
            offset += size
    return entries, offset


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    entries, total = _manifest(ckpt.params, ckpt.buffers)
    header = {
        "version": CHECKPOINT_VERSION,
        "network": ckpt.network.model_dump(mode="json"),
        "scaler": ckpt.scaler.to_dict(),
        "power_w": ckpt.power_w,
        "num_antennas": ckpt.network.num_antennas,
        "num_users": ckpt.network.num_users,
        "manifest": entries,
        "values": total,
        "meta": ckpt.meta,
    }
    tensors = list(ckpt.params.values()) + list(ckpt.buffers.values())
    flat = np.concatenate([t.detach().cpu().numpy().astype("<f8").reshape(-1) for t in tensors])
    return json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + flat.astype("<f8").tobytes()


def save_checkpoint(path: Union[str, Path], ckpt: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(ckpt))
    logger.info("saved checkpoint %s", path)
    return path


def _parse_header(line: bytes) -> Dict[str, Any]:
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptPayload(f"unreadable checkpoint header: {exc}") from exc
    if not isinstance(header, dict):
        raise CorruptPayload("checkpoint header is not an object")
    if header.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint version {header.get('version')} != {CHECKPOINT_VERSION}")
    return header


def _unpack(header: Dict[str, Any], payload: bytes) -> Checkpoint:
    total = int(header["values"])
    if len(payload) != 8 * total:
        raise CorruptPayload(f"payload holds {len(payload)} bytes, expected {8 * total}")
    flat = np.frombuffer(payload, dtype="<f8")
    params, buffers = OrderedDict(), OrderedDict()
    for entry in header["manifest"]:
        offset = int(entry["offset"])
        size = int(np.prod(entry["shape"], dtype=np.int64))
        if offset < 0 or offset + size > total:
            raise CorruptPayload(f"{entry['name']} lies outside the payload")
        chunk = flat[offset: offset + size].reshape(entry["shape"])
        tensor = torch.from_numpy(np.array(chunk, dtype=np.float64))
        if entry["kind"] == "param":
            params[entry["name"]] = tensor.requires_grad_(True)
        else:
            buffers[entry["name"]] = tensor
    return Checkpoint(
        network=NetworkConfig.model_validate(header["network"]),
        params=params,
        buffers=buffers,
        scaler=InputScaler.from_dict(header["scaler"]),
        power_w=float(header["power_w"]),
        meta=header.get("meta", {}),
    )


def checkpoint_from_bytes(data: bytes) -> Checkpoint:
    head, sep, payload = data.partition(b"\n")
    if not sep:
        raise CorruptPayload("checkpoint has no payload")
    header = _parse_header(head)
    try:
        return _unpack(header, payload)
    except CorruptPayload:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptPayload(f"malformed checkpoint header: {exc!r}") from exc


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    return checkpoint_from_bytes(Path(path).read_bytes())


def inspect_checkpoint(path: Union[str, Path]) -> Dict[str, Any]:
    """Header only: (M, K, P, scenario) and the rest of the metadata, without reading tensors."""
    with open(path, "rb") as fh:
        header = _parse_header(fh.readline())
    meta = header.get("meta", {})
    return {
        "num_antennas": header["num_antennas"],
        "num_users": header["num_users"],
        "power_w": header["power_w"],
        "scenario": meta.get("scenario"),
        "meta": meta,
        "network": header["network"],
    }
