"""
Offline strategies: joint training, pre-training with FC fine-tuning, and meta-learning with
full-parameter meta-adaptation.
"""
import logging
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from tqdm import tqdm

from app.adapt.metrics import Stopwatch, TrainRow
from app.config import settings
from app.datasets.records import SamplePair
from app.datasets.tasks import TaskDataset
from app.net.model import FC_NAMES, BeamformingCNN, Params
from app.net.ops import adam_step, check_finite, detach_params, grad, make_adam, mse_loss, sgd_step
from app.net.scaler import InputScaler
from app.numerics import RandomStream
from app.schemas.training import TrainConfig

logger = logging.getLogger(__name__)

# substream keys
_INIT, _SHUFFLE, _SPLIT = 0, 1, 2


@dataclass
class TrainResult:
    params: Params
    buffers: Params
    history: List[TrainRow] = field(default_factory=list)
    steps: int = 0

    @property
    def final_loss(self) -> float:
        return self.history[-1].loss if self.history else float("nan")


def batch_tensors(scaler: InputScaler, pairs: Sequence[SamplePair]) -> Tuple[torch.Tensor, torch.Tensor]:
    x = scaler.transform([p.instance for p in pairs])
    y = torch.from_numpy(np.stack([p.label for p in pairs]))
    return x, y


def _start(model: BeamformingCNN, config: TrainConfig, init: Optional[Tuple[Params, Params]]):
    if init is None:
        return model.init_params(RandomStream(config.seed, keys=(_INIT,)))
    params, buffers = init
    return detach_params(params), {n: b.detach().clone() for n, b in buffers.items()}


def _eval_loss(model: BeamformingCNN, params: Params, buffers: Params, x, y) -> float:
    with torch.no_grad():
        return float(mse_loss(model(params, x, buffers, mode="eval"), y))


def _sgd_inplace(params: Params, grads: Params, lr: float) -> None:
    with torch.no_grad():
        for name, p in params.items():
            p.sub_(lr * grads[name])


def train_joint(
    model: BeamformingCNN,
    pool: Sequence[SamplePair],
    config: TrainConfig,
    scaler: InputScaler,
    *,
    init: Optional[Tuple[Params, Params]] = None,
    stage: str = "joint",
    max_epochs: Optional[int] = None,
) -> TrainResult:
    """
    Minimize the power-fraction MSE over one pool with mini-batches of `batch_size`.
    Stops after `patience` epochs without a `min_delta` improvement of the validation loss,
    at the epoch cap, or after `max_steps` updates.
    """
    if not pool:
        raise ValueError("training pool is empty")
    params, buffers = _start(model, config, init)
    rng = RandomStream(config.seed, keys=(_SHUFFLE,)).generator()

    n = len(pool)
    n_val = int(round(config.val_fraction * n))
    if n_val == 0 or n - n_val < 1:
        train_idx = val_idx = np.arange(n)
    else:
        order = RandomStream(config.seed, keys=(_SPLIT,)).generator().permutation(n)
        val_idx, train_idx = order[:n_val], order[n_val:]
    x_all, y_all = batch_tensors(scaler, pool)
    x_val, y_val = x_all[val_idx], y_all[val_idx]

    optimizer = make_adam(params, config.alpha) if config.joint_optimizer == "adam" else None
    clock = Stopwatch()
    history: List[TrainRow] = []
    best, stale, steps = float("inf"), 0, 0
    epochs = config.max_epochs if max_epochs is None else max_epochs

    for epoch in tqdm(range(epochs), desc=stage, disable=settings.progress_disabled):
        perm = train_idx[rng.permutation(len(train_idx))]
        for start in range(0, len(perm), config.batch_size):
            idx = perm[start:start + config.batch_size]
            pred = model(params, x_all[idx], buffers, mode="train", update_stats=True)
            loss = mse_loss(pred, y_all[idx])
            check_finite(loss, stage)
            grads = grad(loss, params)
            if optimizer is not None:
                adam_step(optimizer, params, grads)
            else:
                _sgd_inplace(params, grads, config.alpha)
            steps += 1
            history.append(TrainRow(stage, steps, float(loss), None, clock.ms()))
            if config.max_steps is not None and steps >= config.max_steps:
                break
        val = _eval_loss(model, params, buffers, x_val, y_val)
        history[-1].val_loss = val
        if best - val > config.min_delta:
            best, stale = val, 0
        else:
            stale += 1
        if stale >= config.patience:
            logger.info("%s: validation plateau after %d epochs", stage, epoch + 1)
            break
        if config.max_steps is not None and steps >= config.max_steps:
            break

    logger.info("%s: %d steps, final validation loss %.6g", stage, steps, history[-1].val_loss)
    return TrainResult(params=params, buffers=buffers, history=history, steps=steps)


def pretrain(model: BeamformingCNN, pool: Sequence[SamplePair], config: TrainConfig, scaler: InputScaler,
             **kwargs) -> TrainResult:
    """Joint training on the mixed source pool; the starting point for fine_tune."""
    return train_joint(model, pool, config, scaler, stage="pretrain", **kwargs)


def _adapt(
    model: BeamformingCNN,
    params: Params,
    buffers: Params,
    adaptation: Sequence[SamplePair],
    config: TrainConfig,
    scaler: InputScaler,
    names: Sequence[str],
    stage: str,
) -> TrainResult:
    """`adapt_steps` Adam steps at rate beta on `names`, BN statistics frozen; fresh optimizer state."""
    if not adaptation:
        raise ValueError("adaptation set is empty")
    params = detach_params(params)
    buffers = {n: b.detach().clone() for n, b in buffers.items()}
    for name, p in params.items():
        p.requires_grad_(name in names)
    trainable = {n: params[n] for n in names}
    optimizer = make_adam(trainable, config.beta)
    x, y = batch_tensors(scaler, adaptation)
    clock = Stopwatch()
    history = [TrainRow(stage, 0, _eval_loss(model, params, buffers, x, y), None, 0.0)]
    for step in range(1, config.adapt_steps + 1):
        loss = mse_loss(model(params, x, buffers, mode="eval"), y)
        check_finite(loss, stage)
        adam_step(optimizer, trainable, grad(loss, trainable))
        history.append(TrainRow(stage, step, float(loss), None, clock.ms()))
    history[-1].val_loss = _eval_loss(model, params, buffers, x, y)
    for p in params.values():
        p.requires_grad_(True)
    return TrainResult(params=params, buffers=buffers, history=history, steps=config.adapt_steps)


def fine_tune(model: BeamformingCNN, pretrained: Tuple[Params, Params], adaptation: Sequence[SamplePair],
              config: TrainConfig, scaler: InputScaler) -> TrainResult:
    """Update only the FC weight and bias; every conv and BN tensor stays bitwise identical."""
    params, buffers = pretrained
    return _adapt(model, params, buffers, adaptation, config, scaler, FC_NAMES, "finetune")


def meta_adapt(model: BeamformingCNN, meta: Tuple[Params, Params], adaptation: Sequence[SamplePair],
               config: TrainConfig, scaler: InputScaler) -> TrainResult:
    """Start from the meta-learned initialization and update every parameter."""
    params, buffers = meta
    return _adapt(model, params, buffers, adaptation, config, scaler, list(params), "meta-adapt")


def inner_adapt(
    model: BeamformingCNN,
    params: Params,
    x: torch.Tensor,
    y: torch.Tensor,
    steps: int,
    lr: float,
    first_order: bool = False,
) -> Params:
    """`steps` differentiable SGD steps with batch statistics; running statistics untouched."""
    fast = params
    for _ in range(steps):
        loss = mse_loss(model(fast, x, mode="train"), y)
        fast = sgd_step(fast, grad(loss, fast, create_graph=not first_order), lr)
    return fast


def _task_gradient(model: BeamformingCNN, params: Params, task, weight: float,
                   config: TrainConfig) -> Tuple[torch.Tensor, Params]:
    xs, ys, xq, yq = task
    fast = inner_adapt(model, params, xs, ys, config.inner_steps, config.beta, config.first_order)
    term = weight * mse_loss(model(fast, xq, mode="train"), yq)
    return term.detach(), grad(term, params)


def meta_gradient(
    model: BeamformingCNN,
    params: Params,
    tasks: Sequence[Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]],
    config: TrainConfig,
    weights: Optional[Sequence[float]] = None,
    *,
    workers: int = 1,
) -> Tuple[torch.Tensor, Params]:
    """
    Outer loss sum_k w_k * L_query(phi_k) and its gradient with respect to `params`, where phi_k
    comes from `inner_steps` steps on task k's support set. Each task is (x_s, y_s, x_q, y_q).
    With zero inner steps this is the plain gradient of the summed query loss.

    Per-task graphs are independent; with `workers` > 1 they run on a thread pool. Terms are
    always summed in task order, so the result does not depend on `workers`.
    """
    weights = [1.0] * len(tasks) if weights is None else list(weights)
    if not tasks:
        raise ValueError("meta-batch is empty")
    jobs = list(zip(tasks, weights))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(lambda job: _task_gradient(model, params, job[0], job[1], config), jobs))
    else:
        results = [_task_gradient(model, params, task, w, config) for task, w in jobs]

    total, grads = results[0]
    grads = OrderedDict((n, g.clone()) for n, g in grads.items())
    for term, g in results[1:]:
        total = total + term
        for name in grads:
            grads[name] += g[name]
    return total, grads


def task_tensors(scaler: InputScaler, task: TaskDataset):
    xs, ys = batch_tensors(scaler, task.support)
    xq, yq = batch_tensors(scaler, task.query)
    return xs, ys, xq, yq


def _update_running_stats(model: BeamformingCNN, params: Params, buffers: Params, x: torch.Tensor) -> None:
    with torch.no_grad():
        model(params, x, buffers, mode="train", update_stats=True)


def meta_train(
    model: BeamformingCNN,
    tasks: Sequence[TaskDataset],
    config: TrainConfig,
    scaler: InputScaler,
    *,
    init: Optional[Tuple[Params, Params]] = None,
    workers: int = 1,
) -> TrainResult:
    """
    Cross-task training: tasks are visited in a fresh permutation every epoch, `batch_size` per
    outer step. Stops when the mean query loss over a window of `meta_plateau_window` outer steps
    improves by less than `min_delta` on the previous window.
    """
    if not tasks:
        raise ValueError("no tasks to meta-train on")
    params, buffers = _start(model, config, init)
    rng = RandomStream(config.seed, keys=(_SHUFFLE,)).generator()
    tensors = [task_tensors(scaler, t) for t in tasks]
    optimizer = make_adam(params, config.alpha) if config.outer_optimizer == "adam" else None
    window = config.meta_plateau_window
    clock = Stopwatch()
    history: List[TrainRow] = []
    recent: List[float] = []
    previous_mean: Optional[float] = None
    steps = 0
    done = False

    for epoch in tqdm(range(config.max_epochs), desc="meta", disable=settings.progress_disabled):
        order = rng.permutation(len(tasks))
        for start in range(0, len(order), config.batch_size):
            batch = [tensors[i] for i in order[start:start + config.batch_size]]
            loss, grads = meta_gradient(model, params, batch, config, workers=workers)
            check_finite(loss, "meta")
            if optimizer is not None:
                adam_step(optimizer, params, grads)
            else:
                _sgd_inplace(params, grads, config.alpha)
            _update_running_stats(model, params, buffers, torch.cat([b[2] for b in batch]))
            steps += 1
            query_loss = float(loss) / len(batch)
            history.append(TrainRow("meta", steps, query_loss, None, clock.ms()))
            recent.append(query_loss)
            if len(recent) == window:
                mean = float(np.mean(recent))
                history[-1].val_loss = mean
                if previous_mean is not None and previous_mean - mean < config.min_delta:
                    logger.info("meta: query loss plateau after %d outer steps", steps)
                    done = True
                previous_mean, recent = mean, []
            if done or (config.max_steps is not None and steps >= config.max_steps):
                done = True
                break
        if done:
            break

    logger.info("meta: %d outer steps over %d tasks", steps, len(tasks))
    return TrainResult(params=params, buffers=buffers, history=history, steps=steps)
