import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from app.datasets.generate import generate_dataset
from app.datasets.records import DatasetFile, SamplePair, merge_datasets
from app.errors import PoolTooSmall
from app.numerics import RandomStream
from app.schemas.scenario import ScenarioConfig

logger = logging.getLogger(__name__)

# substream keys for the two halves of an adaptation split
_ADAPT, _TEST = 0, 1


@dataclass(frozen=True)
class TaskDataset:
    task_id: int
    support: List[SamplePair]
    query: List[SamplePair]
    support_ids: Tuple[int, ...] = ()
    query_ids: Tuple[int, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {"task_id": self.task_id, "support": list(self.support_ids), "query": list(self.query_ids)}


def _as_pool(pool: Union[DatasetFile, Sequence[DatasetFile]]) -> DatasetFile:
    if isinstance(pool, DatasetFile):
        return pool
    return merge_datasets(pool)


def build_tasks(
    pool: Union[DatasetFile, Sequence[DatasetFile]],
    num_tasks: int,
    n_support: int,
    n_query: int,
    stream: RandomStream,
) -> List[TaskDataset]:
    """Each task draws n_support + n_query distinct records; tasks are sampled independently."""
    pool = _as_pool(pool)
    need = n_support + n_query
    if len(pool) < need:
        raise PoolTooSmall(f"pool has {len(pool)} records, each task needs {need}")
    rng = stream.generator()
    tasks = []
    for t in range(num_tasks):
        idx = rng.choice(len(pool), size=need, replace=False)
        s_ids, q_ids = tuple(int(i) for i in idx[:n_support]), tuple(int(i) for i in idx[n_support:])
        tasks.append(TaskDataset(
            task_id=t,
            support=[pool[i] for i in s_ids],
            query=[pool[i] for i in q_ids],
            support_ids=s_ids,
            query_ids=q_ids,
        ))
    logger.info("built %d tasks (%d support / %d query) from %d records", num_tasks, n_support, n_query, len(pool))
    return tasks


def tasks_from_index(pool: DatasetFile, index: Sequence[Dict[str, Any]]) -> List[TaskDataset]:
    """Rebuild tasks from the `to_dict` entries of a saved task index."""
    out = []
    for entry in index:
        s_ids, q_ids = tuple(entry["support"]), tuple(entry["query"])
        if max(s_ids + q_ids, default=-1) >= len(pool):
            raise PoolTooSmall(f"task {entry['task_id']} references records beyond the pool")
        out.append(TaskDataset(
            task_id=int(entry["task_id"]),
            support=[pool[i] for i in s_ids],
            query=[pool[i] for i in q_ids],
            support_ids=s_ids,
            query_ids=q_ids,
        ))
    return out


def split_adaptation(
    config: ScenarioConfig,
    n_adapt: int,
    n_test: int,
    stream: RandomStream,
    *,
    workers: Optional[int] = None,
) -> Tuple[DatasetFile, DatasetFile]:
    """Adaptation and test sets from one scenario, drawn on disjoint substreams."""
    if n_adapt < 1 or n_test < 1:
        raise ValueError("both splits need at least one record")
    adapt = generate_dataset(config, n_adapt, stream.substream(_ADAPT), workers=workers, split="adapt")
    test = generate_dataset(config, n_test, stream.substream(_TEST), workers=workers, split="test")
    return adapt, test
