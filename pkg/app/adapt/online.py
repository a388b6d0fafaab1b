"""
Online adaptation over a stream of time slots that crosses scenario boundaries.

Strategies:
  online-meta            meta-updates on past slots, then adapts to the current slot
  online-joint           follow-the-leader: retrains on all past slots, then adapts
  offline-meta-periodic  meta-adapts the offline initialization every `refresh_period` slots
  offline-upper-bound    trained on matched data at every scenario boundary
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import torch

from app.adapt.evaluate import network_predictor
from app.adapt.metrics import SlotRow, Stopwatch
from app.adapt.offline import batch_tensors, meta_adapt, meta_gradient, train_joint
from app.balancing import recover_downlink, solve_balancing
from app.channels.models import ChannelInstance
from app.channels.scenarios import ScenarioSource
from app.datasets.generate import generate_dataset
from app.datasets.records import SamplePair, canonicalize
from app.errors import DegenerateInstance, EmptyHistory, NoConvergence, NotPositiveDefinite
from app.net.checkpoint import Checkpoint
from app.net.model import BeamformingCNN, Params
from app.net.ops import check_finite, detach_params, grad, mse_loss
from app.net.scaler import InputScaler, fractions_to_powers
from app.numerics import RandomStream
from app.schemas.schedule import ScheduleConfig
from app.schemas.training import TrainConfig

logger = logging.getLogger(__name__)

STRATEGIES = ("online-meta", "online-joint", "offline-meta-periodic", "offline-upper-bound")

# substream keys
_DATA, _META, _UPPER = 0, 1, 2

Model = Tuple[Params, Params]


@dataclass(frozen=True)
class SlotData:
    slot: int
    pairs: List[SamplePair]
    lineage: FrozenSet[int]


class SlotBuffer:
    """Every B_t received so far, tagged with the slot it arrived in."""

    def __init__(self):
        self.slots: List[SlotData] = []

    def __len__(self) -> int:
        return len(self.slots)

    def add(self, slot: int, pairs: Sequence[SamplePair]) -> SlotData:
        if slot != len(self.slots):
            raise ValueError(f"slot {slot} arrived out of order (expected {len(self.slots)})")
        data = SlotData(slot=slot, pairs=list(pairs), lineage=frozenset({slot}))
        self.slots.append(data)
        return data

    def __getitem__(self, slot: int) -> SlotData:
        return self.slots[slot]

    def before(self, slot: int) -> List[SlotData]:
        return self.slots[:slot]

    def sample_tasks(self, upto: int, n_task: int, rng: np.random.Generator) -> np.ndarray:
        """Appearance counts Z_k over tasks 0..upto-1 for `n_task` draws with replacement."""
        if upto < 1:
            raise EmptyHistory("no past slots to sample tasks from")
        ids = rng.integers(0, upto, size=n_task)
        counts = np.bincount(ids, minlength=upto)
        assert int(counts.sum()) == n_task
        return counts


def label_instances(instances: Sequence[ChannelInstance]) -> List[SamplePair]:
    """Canonicalize and label; draws the solver cannot handle are dropped with a warning."""
    out = []
    for inst in instances:
        inst = canonicalize(inst)
        try:
            uplink, _ = solve_balancing(inst)
        except (NoConvergence, DegenerateInstance, NotPositiveDefinite) as exc:
            logger.warning("dropping unlabelled arrival: %s", exc)
            continue
        out.append(SamplePair(instance=inst, label=uplink.q / inst.power))
    return out


def sgd_adapt(model: BeamformingCNN, start: Model, pairs: Sequence[SamplePair], steps: int, lr: float,
              scaler: InputScaler) -> Model:
    """`steps` descent steps on every parameter with running statistics frozen."""
    params, buffers = start
    params = detach_params(params)
    if steps == 0 or not pairs:
        return params, buffers
    x, y = batch_tensors(scaler, pairs)
    for _ in range(steps):
        loss = mse_loss(model(params, x, buffers, mode="eval"), y)
        check_finite(loss, "online adaptation")
        g = grad(loss, params)
        with torch.no_grad():
            for name, p in params.items():
                p.sub_(lr * g[name])
    return params, buffers


@dataclass
class OnlineMetaState:
    params: Params
    buffers: Params
    history: SlotBuffer = field(default_factory=SlotBuffer)
    lineage: FrozenSet[int] = frozenset()


def online_meta_step(
    model: BeamformingCNN,
    state: OnlineMetaState,
    t: int,
    arrivals: Sequence[SamplePair],
    schedule: ScheduleConfig,
    train: TrainConfig,
    scaler: InputScaler,
    stream: RandomStream,
    *,
    workers: int = 1,
) -> Tuple[OnlineMetaState, Model, FrozenSet[int]]:
    """
    Store B_t, run `outer_iterations` Z-weighted meta-updates over tasks sampled from slots
    0..t-1, then adapt a copy to B_t. The state keeps the pre-adaptation parameters.
    Returns (state, adapted model, slots the adapted model depends on).
    """
    if t < 1:
        raise EmptyHistory("slot 0 only stores data; there is nothing to learn from yet")
    if len(state.history) != t:
        raise EmptyHistory(f"history holds {len(state.history)} slots, slot {t} needs {t}")
    state.history.add(t, arrivals)

    inner = train.model_copy(update={"inner_steps": schedule.inner_steps})
    params = state.params
    rng = stream.substream(t).generator()
    for _ in range(schedule.outer_iterations):
        counts = state.history.sample_tasks(t, schedule.task_minibatch, rng)
        tasks, weights = [], []
        for k in np.flatnonzero(counts):
            pairs = state.history[int(k)].pairs
            if not pairs:
                continue
            tr = rng.choice(len(pairs), size=min(schedule.train_per_task, len(pairs)), replace=False)
            va = rng.choice(len(pairs), size=min(schedule.val_per_task, len(pairs)), replace=False)
            xs, ys = batch_tensors(scaler, [pairs[i] for i in tr])
            xq, yq = batch_tensors(scaler, [pairs[i] for i in va])
            tasks.append((xs, ys, xq, yq))
            weights.append(float(counts[k]))
        if not tasks:
            logger.warning("slot %d: sampled slots hold no labelled pairs", t)
            continue
        loss, g = meta_gradient(model, params, tasks, inner, weights, workers=workers)
        check_finite(loss, "online meta update")
        with torch.no_grad():
            for name, p in params.items():
                p.sub_(train.alpha * g[name])

    state.lineage = state.lineage | frozenset(range(t))
    adapted = sgd_adapt(model, (params, state.buffers), arrivals, schedule.adapt_steps, train.beta, scaler)
    return state, adapted, state.lineage | {t}


def ftl_update(
    model: BeamformingCNN,
    history: Sequence[SlotData],
    start: Model,
    train: TrainConfig,
    scaler: InputScaler,
    *,
    current: Optional[Sequence[SamplePair]] = None,
    adapt_steps: int = 0,
    max_epochs: Optional[int] = None,
) -> Tuple[Model, Model]:
    """
    Follow the leader: train on the union of every past slot (warm-started from `start`), then
    adapt a copy to the current slot. Returns (leader, adapted).
    """
    if not history:
        raise EmptyHistory("follow-the-leader needs at least one past slot")
    pool = [p for slot in history for p in slot.pairs]
    result = train_joint(model, pool, train, scaler, init=start, stage="ftl", max_epochs=max_epochs)
    leader = (result.params, result.buffers)
    adapted = sgd_adapt(model, leader, current or [], adapt_steps, train.beta, scaler)
    return leader, adapted


@dataclass
class StrategyContext:
    model: BeamformingCNN
    scaler: InputScaler
    meta: Model
    schedule: ScheduleConfig
    train: TrainConfig
    stream: RandomStream
    workers: int = 1


class OnlineMeta:
    name = "online-meta"

    def __init__(self, ctx: StrategyContext):
        self.ctx = ctx
        params, buffers = ctx.meta
        self.state = OnlineMetaState(params=detach_params(params), buffers=buffers)

    def slot_model(self, t: int, segment: int, arrivals: List[SamplePair]) -> Tuple[Model, FrozenSet[int]]:
        ctx = self.ctx
        if t == 0:
            self.state.history.add(0, arrivals)
            return (self.state.params, self.state.buffers), frozenset()
        self.state, adapted, lineage = online_meta_step(
            ctx.model, self.state, t, arrivals, ctx.schedule, ctx.train, ctx.scaler, ctx.stream.substream(_META),
            workers=ctx.workers,
        )
        return adapted, lineage


class OnlineJoint:
    name = "online-joint"

    def __init__(self, ctx: StrategyContext):
        self.ctx = ctx
        self.history = SlotBuffer()
        self.leader: Model = (detach_params(ctx.meta[0]), ctx.meta[1])

    def slot_model(self, t: int, segment: int, arrivals: List[SamplePair]) -> Tuple[Model, FrozenSet[int]]:
        ctx = self.ctx
        if t == 0:
            self.history.add(0, arrivals)
            return self.leader, frozenset()
        self.leader, adapted = ftl_update(
            ctx.model, self.history.before(t), self.leader, ctx.train, ctx.scaler,
            current=arrivals, adapt_steps=ctx.schedule.adapt_steps, max_epochs=ctx.schedule.ftl_max_epochs,
        )
        self.history.add(t, arrivals)
        return adapted, frozenset(range(t + 1))


class OfflineMetaPeriodic:
    name = "offline-meta-periodic"

    def __init__(self, ctx: StrategyContext):
        self.ctx = ctx
        self.current: Model = ctx.meta
        self.lineage: FrozenSet[int] = frozenset()
        self.window: List[SlotData] = []

    def slot_model(self, t: int, segment: int, arrivals: List[SamplePair]) -> Tuple[Model, FrozenSet[int]]:
        ctx = self.ctx
        period = ctx.schedule.refresh_period
        if t > 0 and t % period == 0 and self.window:
            pool = [p for slot in self.window for p in slot.pairs]
            adapt_cfg = ctx.train.model_copy(update={"adapt_steps": ctx.schedule.adapt_steps})
            result = meta_adapt(ctx.model, ctx.meta, pool, adapt_cfg, ctx.scaler)
            self.current = (result.params, result.buffers)
            self.lineage = frozenset(s.slot for s in self.window)
            logger.info("offline-meta-periodic refreshed at slot %d from %d pairs", t, len(pool))
            self.window = []
        self.window.append(SlotData(slot=t, pairs=list(arrivals), lineage=frozenset({t})))
        return self.current, self.lineage


class OfflineUpperBound:
    name = "offline-upper-bound"

    def __init__(self, ctx: StrategyContext):
        self.ctx = ctx
        self.segment: Optional[int] = None
        self.current: Model = ctx.meta

    def slot_model(self, t: int, segment: int, arrivals: List[SamplePair]) -> Tuple[Model, FrozenSet[int]]:
        ctx = self.ctx
        if segment != self.segment:
            scenario = ctx.schedule.segments[segment].scenario
            pool = generate_dataset(
                scenario, ctx.schedule.upper_bound_pool, ctx.stream.substream(_UPPER, segment), workers=ctx.workers
            )
            result = train_joint(ctx.model, pool.records, ctx.train, ctx.scaler, init=ctx.meta, stage="upper-bound")
            self.current = (result.params, result.buffers)
            self.segment = segment
        return self.current, frozenset()


_STRATEGY_TYPES = {cls.name: cls for cls in (OnlineMeta, OnlineJoint, OfflineMetaPeriodic, OfflineUpperBound)}


@dataclass
class OnlineReport:
    rows: List[SlotRow]
    segments: List[Dict]
    lineage: Dict[Tuple[int, str], FrozenSet[int]]

    def series(self, strategy: str) -> np.ndarray:
        return np.array([r.mean_min_sinr_db for r in self.rows if r.strategy == strategy])


def slot_min_sinr(model: BeamformingCNN, slot_model: Model, scaler: InputScaler,
                  test: Sequence[ChannelInstance]) -> np.ndarray:
    params, buffers = slot_model
    fractions = network_predictor(model, params, buffers, scaler)(test)
    return np.array([
        recover_downlink(inst, fractions_to_powers(fractions[i], inst.power)).min_sinr
        for i, inst in enumerate(test)
    ])


def run_schedule(
    schedule: ScheduleConfig,
    strategies: Sequence[str],
    checkpoint: Checkpoint,
    train: TrainConfig,
    seed: int,
    *,
    workers: int = 1,
) -> OnlineReport:
    """
    Simulate the slot stream; every strategy sees the same arrivals and test channels.
    `workers` bounds meta-batch and data-generation parallelism; results do not depend on it.
    """
    unknown = [s for s in strategies if s not in _STRATEGY_TYPES]
    if unknown:
        raise ValueError(f"unknown strategies {unknown}; choose from {list(STRATEGIES)}")
    stream = RandomStream(seed)
    model = checkpoint.model
    ctx = StrategyContext(
        model=model,
        scaler=checkpoint.scaler,
        meta=(checkpoint.params, checkpoint.buffers),
        schedule=schedule,
        train=train,
        stream=stream,
        workers=workers,
    )
    runners = [_STRATEGY_TYPES[name](ctx) for name in strategies]

    rows: List[SlotRow] = []
    lineage: Dict[Tuple[int, str], FrozenSet[int]] = {}
    linear: Dict[Tuple[int, str], List[float]] = {}
    t = 0
    for seg_index, segment in enumerate(schedule.segments):
        source = ScenarioSource(segment.scenario, stream.substream(_DATA, seg_index), schedule.mobility_dt_s)
        for _ in range(segment.slots):
            arrivals = label_instances(source.draw(schedule.arrivals_per_slot))
            test = [canonicalize(inst) for inst in source.draw(schedule.test_per_slot)]
            for runner in runners:
                clock = Stopwatch()
                slot_model, used = runner.slot_model(t, seg_index, arrivals)
                elapsed = clock.ms()
                sinr = slot_min_sinr(model, slot_model, ctx.scaler, test)
                mean = float(np.mean(sinr))
                rows.append(SlotRow(t, segment.name, runner.name, float(10 * np.log10(mean)), elapsed))
                lineage[(t, runner.name)] = used
                linear.setdefault((seg_index, runner.name), []).append(mean)
            logger.debug("slot %d (%s) done", t, segment.name)
            source.next_slot()
            t += 1

    segments = [
        {
            "segment": seg_index,
            "scenario": schedule.segments[seg_index].name,
            "strategy": name,
            "mean_min_sinr_db": float(10 * np.log10(np.mean(values))),
        }
        for (seg_index, name), values in linear.items()
    ]
    return OnlineReport(rows=rows, segments=segments, lineage=lineage)
