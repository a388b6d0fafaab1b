"""
Labelled sample pairs and the line-oriented dataset file.

File layout: the first line is the header JSON, then one JSON object per record
{"h_re": K x M, "h_im": K x M, "q": K}. Floats are written by `json` with Python's
shortest round-trip repr, so write -> read -> write is byte-identical.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import numpy as np

from app.channels.models import ChannelInstance
from app.errors import CorruptPayload, DimensionMismatch, VersionMismatch

logger = logging.getLogger(__name__)

DATASET_VERSION = 1


def canonicalize(instance: ChannelInstance) -> ChannelInstance:
    """(h_k, sigma_k) -> (h_k / sigma_k, 1); every SINR is unchanged."""
    sigma = np.sqrt(instance.sigma2)
    return ChannelInstance(
        H=instance.H / sigma[:, None],
        sigma2=np.ones(instance.num_users),
        power=instance.power,
    )


@dataclass(frozen=True)
class SamplePair:
    instance: ChannelInstance
    label: np.ndarray  # q* / P

    def __post_init__(self):
        label = np.asarray(self.label, dtype=np.float64).reshape(-1)
        if label.shape[0] != self.instance.num_users:
            raise DimensionMismatch(f"label has {label.shape[0]} entries for {self.instance.num_users} users")
        object.__setattr__(self, "label", label)

    @property
    def q(self) -> np.ndarray:
        return self.label * self.instance.power

    def to_record(self) -> Dict[str, Any]:
        H = self.instance.H
        return {"h_re": H.real.tolist(), "h_im": H.imag.tolist(), "q": self.label.tolist()}


@dataclass
class DatasetFile:
    header: Dict[str, Any]
    records: List[SamplePair] = field(default_factory=list)

    @property
    def num_antennas(self) -> int:
        return int(self.header["num_antennas"])

    @property
    def num_users(self) -> int:
        return int(self.header["num_users"])

    @property
    def power_w(self) -> float:
        return float(self.header["power_w"])

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index):
        return self.records[index]

    def instances(self) -> List[ChannelInstance]:
        return [r.instance for r in self.records]

    def labels(self) -> np.ndarray:
        return np.stack([r.label for r in self.records])

    def to_bytes(self) -> bytes:
        header = dict(self.header, count=len(self.records))
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(json.dumps(r.to_record()) for r in self.records)
        return ("\n".join(lines) + "\n").encode("utf-8")

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        logger.info("wrote %d records to %s", len(self.records), path)
        return path

    @classmethod
    def from_bytes(cls, data: bytes) -> "DatasetFile":
        lines = data.decode("utf-8").splitlines()
        if not lines:
            raise CorruptPayload("empty dataset file")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise CorruptPayload(f"unreadable dataset header: {exc}") from exc
        if header.get("version") != DATASET_VERSION:
            raise VersionMismatch(f"dataset version {header.get('version')} != {DATASET_VERSION}")
        power = float(header["power_w"])
        records = []
        for n, line in enumerate(lines[1:], start=1):
            try:
                rec = json.loads(line)
                H = np.asarray(rec["h_re"], dtype=np.float64) + 1j * np.asarray(rec["h_im"], dtype=np.float64)
                inst = ChannelInstance(H=H, sigma2=np.ones(H.shape[0]), power=power)
                records.append(SamplePair(instance=inst, label=rec["q"]))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CorruptPayload(f"record {n} is malformed: {exc}") from exc
        if len(records) != int(header.get("count", -1)):
            raise CorruptPayload(f"header announces {header.get('count')} records, found {len(records)}")
        return cls(header=header, records=records)

    @classmethod
    def read(cls, path: Union[str, Path]) -> "DatasetFile":
        return cls.from_bytes(Path(path).read_bytes())


def make_header(
    *,
    num_antennas: int,
    num_users: int,
    power_dbm: float,
    power_w: float,
    scenario: Any,
    seed: int,
    count: int,
    redraws: int = 0,
    **extra: Any,
) -> Dict[str, Any]:
    header = {
        "version": DATASET_VERSION,
        "num_antennas": num_antennas,
        "num_users": num_users,
        "power_dbm": power_dbm,
        "power_w": power_w,
        "scenario": scenario,
        "seed": seed,
        "count": count,
        "redraws": redraws,
    }
    header.update(extra)
    return header


def merge_datasets(files: Iterable[DatasetFile]) -> DatasetFile:
    """Concatenate pools with a common (M, K, P); records keep their input order."""
    files = list(files)
    if not files:
        raise ValueError("nothing to merge")
    first = files[0]
    key = (first.num_antennas, first.num_users, first.power_w)
    for f in files[1:]:
        if (f.num_antennas, f.num_users, f.power_w) != key:
            raise DimensionMismatch("merged datasets must share (M, K, P)")
    records = [r for f in files for r in f.records]
    header = make_header(
        num_antennas=first.num_antennas,
        num_users=first.num_users,
        power_dbm=first.header["power_dbm"],
        power_w=first.power_w,
        scenario=[f.header["scenario"] for f in files],
        seed=first.header["seed"],
        count=len(records),
        redraws=sum(int(f.header.get("redraws", 0)) for f in files),
        sources=[f.digest() for f in files],
    )
    return DatasetFile(header=header, records=records)
