import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from app.balancing import recover_downlink, solve_balancing
from app.channels import draw_instance
from app.channels.models import ChannelInstance
from app.config import settings
from app.datasets.records import DatasetFile, SamplePair, canonicalize, make_header
from app.errors import DatasetGenerationError, DegenerateInstance, NoConvergence, NotPositiveDefinite
from app.numerics import RandomStream
from app.schemas.scenario import ScenarioConfig

logger = logging.getLogger(__name__)

LABEL_TOLERANCE = 1e-4
MAX_ATTEMPTS = 100


def label_ratio(instance: ChannelInstance, label: np.ndarray, balanced_sinr: float) -> float:
    """Min downlink SINR of recover_downlink(P * label) over the balanced level."""
    solution = recover_downlink(instance, label * instance.power)
    return solution.min_sinr / balanced_sinr


def _label_record(args: Tuple[ScenarioConfig, RandomStream, int]) -> Tuple[int, SamplePair, int]:
    """Draw, canonicalize and solve record `index`; failed draws move to the next substream."""
    config, stream, index = args
    record_stream = stream.substream(index)
    for attempt in range(MAX_ATTEMPTS):
        instance = canonicalize(draw_instance(config, record_stream.substream(attempt)))
        try:
            uplink, _ = solve_balancing(instance)
            label = uplink.q / instance.power
            ratio = label_ratio(instance, label, uplink.balanced_sinr)
        except (NoConvergence, DegenerateInstance, NotPositiveDefinite) as exc:
            logger.warning("record %d attempt %d redrawn: %s", index, attempt, exc)
            continue
        if abs(ratio - 1.0) > LABEL_TOLERANCE:
            logger.warning("record %d attempt %d failed the label self-check (ratio %.6f)", index, attempt, ratio)
            continue
        return index, SamplePair(instance=instance, label=label), attempt
    raise DatasetGenerationError(f"record {index} failed {MAX_ATTEMPTS} consecutive draws")


def generate_dataset(
    config: ScenarioConfig,
    count: int,
    stream: RandomStream,
    *,
    workers: Optional[int] = None,
    **header_extra,
) -> DatasetFile:
    """
    `count` labelled, canonicalized records. Record i only depends on (stream, i), so the file is
    identical for any number of workers.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    workers = settings.WORKERS if workers is None else workers
    jobs = [(config, stream, i) for i in range(count)]
    progress = dict(total=count, desc=f"gen {config.channel_model.value}", disable=settings.progress_disabled)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(tqdm(pool.map(_label_record, jobs, chunksize=max(1, count // (8 * workers))), **progress))
    else:
        results = [_label_record(job) for job in tqdm(jobs, **progress)]

    results.sort(key=lambda r: r[0])
    redraws = sum(r[2] for r in results)
    rate = redraws / (count + redraws)
    if rate > settings.MAX_REDRAW_RATE:
        raise DatasetGenerationError(
            f"redraw rate {rate:.4f} exceeds {settings.MAX_REDRAW_RATE} ({redraws} redraws for {count} records)"
        )
    if redraws:
        logger.info("%d redraws while generating %d records", redraws, count)

    header = make_header(
        num_antennas=config.num_antennas,
        num_users=config.num_users,
        power_dbm=config.power_dbm,
        power_w=config.power_w,
        scenario=config.model_dump(mode="json"),
        seed=stream.seed,
        count=count,
        redraws=redraws,
        stream=[stream.stream_id, *stream.keys],
        **header_extra,
    )
    return DatasetFile(header=header, records=[r[1] for r in results])


def verify_labels(dataset: DatasetFile, tol: float = LABEL_TOLERANCE) -> List[int]:
    """Indices of records whose label does not reproduce the solver's balanced level."""
    failed = []
    for i, pair in enumerate(tqdm(dataset.records, desc="verify", disable=settings.progress_disabled)):
        uplink, _ = solve_balancing(pair.instance)
        if abs(label_ratio(pair.instance, pair.label, uplink.balanced_sinr) - 1.0) > tol:
            failed.append(i)
    if failed:
        logger.warning("%d of %d labels failed the self-check", len(failed), len(dataset))
    return failed
