import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from app.config import settings

logger = logging.getLogger(__name__)


class Stopwatch:
    """Milliseconds since construction, or 0 when timings are not recorded."""

    def __init__(self):
        self._start = time.perf_counter()

    def ms(self) -> float:
        if not settings.RECORD_TIMINGS:
            return 0.0
        return (time.perf_counter() - self._start) * 1000.0


@dataclass
class TrainRow:
    stage: str
    step: int
    loss: float
    val_loss: Optional[float] = None
    wall_ms: float = 0.0


@dataclass
class SlotRow:
    slot: int
    scenario: str
    strategy: str
    mean_min_sinr_db: float
    adaptation_ms: float = 0.0


def render_csv(rows: List[Any], header_comment: Optional[Dict[str, Any]] = None) -> str:
    """
    CSV with one optional leading `# {json}` line carrying the effective config.
    Empty cells stand for missing values.
    """
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    if header_comment is not None:
        buf.write("# " + json.dumps(header_comment, sort_keys=True) + "\n")
    names = [f.name for f in fields(rows[0])]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        values = asdict(row)
        writer.writerow(["" if values[n] is None else values[n] for n in names])
    return buf.getvalue()


def write_csv(path: Union[str, Path], rows: List[Any], header_comment: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(rows, header_comment), encoding="utf-8")
    logger.info("wrote %d rows to %s", len(rows), path)
    return path


def write_json(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
