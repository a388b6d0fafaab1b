from time import perf_counter

import numpy as np
import pytest
import torch

from app.adapt import (
    adaptation_sweep,
    evaluate,
    fine_tune,
    label_predictor,
    meta_adapt,
    meta_gradient,
    meta_train,
    network_predictor,
    pretrain,
    train_joint,
)
from app.adapt.offline import batch_tensors, inner_adapt, task_tensors
from app.balancing import recover_downlink, solve_balancing
from app.datasets import build_tasks, generate_dataset, merge_datasets, split_adaptation
from app.errors import NonFiniteLoss
from app.net import FC_NAMES, BeamformingCNN, InputScaler, detach_params, fractions_to_powers, grad, mse_loss, sgd_step
from app.net.checkpoint import Checkpoint
from app.numerics import RandomStream
from app.schemas.scenario import ChannelModel, ScenarioConfig
from app.schemas.training import NetworkConfig, TrainConfig
from tests.conftest import random_instance


@pytest.fixture
def pool(small_config):
    return generate_dataset(small_config, 16, RandomStream(40))


@pytest.fixture
def scaler(pool):
    return InputScaler.fit(pool.instances())


@pytest.fixture
def model():
    return BeamformingCNN(NetworkConfig(num_antennas=2, num_users=2))


@pytest.fixture
def tiny():
    return BeamformingCNN(NetworkConfig(num_antennas=2, num_users=2, channels=2, kernel_size=1))


def _task_batch(pool, scaler, n_tasks=2, n_support=3, n_query=3, seed=41):
    tasks = build_tasks(pool, n_tasks, n_support, n_query, RandomStream(seed))
    return [task_tensors(scaler, t) for t in tasks]


# --- joint training -------------------------------------------------------------------------

def test_joint_training_fits_small_pool(model, pool, scaler):
    cfg = TrainConfig(alpha=0.01, batch_size=8, val_fraction=0.0, max_epochs=400, patience=400, min_delta=0.0)
    result = train_joint(model, pool[:8], cfg, scaler)
    losses = [row.loss for row in result.history]
    assert min(losses) < losses[0] / 100.0
    assert result.steps == 400
    assert result.history[-1].val_loss is not None


def test_joint_training_is_reproducible(model, pool, scaler):
    cfg = TrainConfig(batch_size=4, max_epochs=3, seed=5)
    a = train_joint(model, pool, cfg, scaler)
    b = train_joint(model, pool, cfg, scaler)
    assert all(torch.equal(a.params[n], b.params[n]) for n in a.params)
    assert [r.loss for r in a.history] == [r.loss for r in b.history]


def test_validation_plateau_stops_training(model, pool, scaler):
    cfg = TrainConfig(batch_size=4, val_fraction=0.0, min_delta=1.0, patience=2, max_epochs=50)
    result = train_joint(model, pool[:8], cfg, scaler)
    assert result.steps == 6


def test_step_cap(model, pool, scaler):
    result = pretrain(model, pool, TrainConfig(batch_size=4, max_steps=3), scaler)
    assert result.steps == 3
    assert [row.stage for row in result.history] == ["pretrain"] * 3


def test_diverging_rate_raises(model, pool, scaler):
    cfg = TrainConfig(alpha=1e308, batch_size=8, val_fraction=0.0, max_epochs=50)
    with pytest.raises(NonFiniteLoss):
        train_joint(model, pool[:8], cfg, scaler)


def test_empty_pool_rejected(model, scaler):
    with pytest.raises(ValueError):
        train_joint(model, [], TrainConfig(), scaler)


# --- adaptation -----------------------------------------------------------------------------

@pytest.fixture
def pretrained(model, pool, scaler):
    result = pretrain(model, pool, TrainConfig(batch_size=8, max_steps=10), scaler)
    return result.params, result.buffers


def test_fine_tune_only_moves_fc(model, pretrained, pool, scaler):
    cfg = TrainConfig(adapt_steps=5, beta=0.01)
    result = fine_tune(model, pretrained, pool[:4], cfg, scaler)
    params, buffers = pretrained
    for name, p in params.items():
        if name in FC_NAMES:
            assert not torch.equal(result.params[name], p.detach())
        else:
            assert torch.equal(result.params[name], p.detach()), name
    assert all(torch.equal(result.buffers[n], buffers[n]) for n in buffers)
    assert len(result.history) == 6
    assert result.history[0].step == 0
    assert all(p.requires_grad for p in result.params.values())


def test_fine_tune_steps_are_adam_at_beta(model, pretrained, pool, scaler):
    # the first Adam step moves every entry by beta * g / (|g| + eps)
    result = fine_tune(model, pretrained, pool[:4], TrainConfig(adapt_steps=1, beta=0.01), scaler)
    for name in FC_NAMES:
        delta = (result.params[name] - pretrained[0][name].detach()).abs()
        assert float(delta.max()) <= 0.01 * (1 + 1e-9)
        assert float(delta.max()) == pytest.approx(0.01, rel=1e-3)


def test_meta_adapt_moves_every_parameter(model, pretrained, pool, scaler):
    result = meta_adapt(model, pretrained, pool[:4], TrainConfig(adapt_steps=3), scaler)
    params, buffers = pretrained
    for name, p in params.items():
        assert not torch.equal(result.params[name], p.detach()), name
    assert all(torch.equal(result.buffers[n], buffers[n]) for n in buffers)


def test_adaptation_reduces_loss_on_its_samples(model, pretrained, pool, scaler):
    result = meta_adapt(model, pretrained, pool[:4], TrainConfig(adapt_steps=20, beta=0.01), scaler)
    assert result.history[-1].val_loss < result.history[0].loss


def test_adaptation_leaves_source_untouched(model, pretrained, pool, scaler):
    params, _ = pretrained
    before = {n: p.detach().clone() for n, p in params.items()}
    meta_adapt(model, pretrained, pool[:4], TrainConfig(adapt_steps=3), scaler)
    assert all(torch.equal(params[n].detach(), before[n]) for n in params)


# --- meta-gradient --------------------------------------------------------------------------

def test_zero_inner_steps_reduces_to_joint_gradient(tiny, pool, scaler):
    params, _ = tiny.init_params(RandomStream(42))
    tasks = _task_batch(pool, scaler)
    cfg = TrainConfig(inner_steps=0)
    total, meta_grads = meta_gradient(tiny, params, tasks, cfg)

    joint = sum(mse_loss(tiny(params, xq, mode="train"), yq) for _, _, xq, yq in tasks)
    joint_grads = grad(joint, params)
    assert float(total) == pytest.approx(float(joint), abs=1e-12)
    for name in params:
        assert torch.max(torch.abs(meta_grads[name] - joint_grads[name])) <= 1e-12


def test_first_order_is_query_gradient_at_adapted_point(tiny, pool, scaler):
    params, _ = tiny.init_params(RandomStream(43))
    tasks = _task_batch(pool, scaler)
    cfg = TrainConfig(inner_steps=2, beta=0.05, first_order=True)
    _, meta_grads = meta_gradient(tiny, params, tasks, cfg)

    expected = None
    for xs, ys, xq, yq in tasks:
        fast = params
        for _ in range(2):
            fast = sgd_step(fast, grad(mse_loss(tiny(fast, xs, mode="train"), ys), fast), 0.05)
        fast = detach_params(fast)
        g = grad(mse_loss(tiny(fast, xq, mode="train"), yq), fast)
        expected = g if expected is None else {n: expected[n] + g[n] for n in g}
    for name in params:
        assert torch.allclose(meta_grads[name], expected[name], atol=1e-12), name


def test_second_order_meta_gradient_matches_finite_differences(tiny, pool, scaler):
    params, _ = tiny.init_params(RandomStream(44))
    tasks = _task_batch(pool, scaler)
    cfg = TrainConfig(inner_steps=1, beta=0.1)
    _, analytic = meta_gradient(tiny, params, tasks, cfg)

    def objective(p):
        total, _ = meta_gradient(tiny, detach_params(p), tasks, cfg)
        return float(total)

    h = 1e-6
    base = {n: p.detach().clone() for n, p in params.items()}
    for name, value in base.items():
        numeric = torch.zeros_like(value)
        for i in range(value.numel()):
            plus = {n: v.clone() for n, v in base.items()}
            minus = {n: v.clone() for n, v in base.items()}
            plus[name].view(-1)[i] += h
            minus[name].view(-1)[i] -= h
            numeric.view(-1)[i] = (objective(plus) - objective(minus)) / (2 * h)
        err = torch.linalg.norm(analytic[name] - numeric)
        assert err <= 1e-3 * float(torch.linalg.norm(numeric)) + 1e-7, name


def test_second_order_differs_from_first_order(tiny, pool, scaler):
    params, _ = tiny.init_params(RandomStream(45))
    tasks = _task_batch(pool, scaler)
    _, full = meta_gradient(tiny, params, tasks, TrainConfig(inner_steps=1, beta=0.5))
    _, first = meta_gradient(tiny, params, tasks, TrainConfig(inner_steps=1, beta=0.5, first_order=True))
    assert any(not torch.allclose(full[n], first[n]) for n in params)


def test_meta_gradient_independent_of_workers(tiny, pool, scaler):
    params, _ = tiny.init_params(RandomStream(47))
    tasks = _task_batch(pool, scaler, n_tasks=3)
    cfg = TrainConfig(inner_steps=1, beta=0.1)
    serial_loss, serial = meta_gradient(tiny, params, tasks, cfg, [1.0, 2.0, 1.0])
    pooled_loss, pooled = meta_gradient(tiny, params, tasks, cfg, [1.0, 2.0, 1.0], workers=3)
    assert torch.equal(serial_loss, pooled_loss)
    assert all(torch.equal(serial[n], pooled[n]) for n in params)
    with pytest.raises(ValueError):
        meta_gradient(tiny, params, [], cfg)


def test_inner_adapt_keeps_graph(tiny, pool, scaler):
    params, _ = tiny.init_params(RandomStream(46))
    xs, ys = batch_tensors(scaler, pool[:4])
    fast = inner_adapt(tiny, params, xs, ys, steps=2, lr=0.1)
    assert all(fast[n].grad_fn is not None for n in fast)
    assert inner_adapt(tiny, params, xs, ys, steps=0, lr=0.1) is params


# --- meta-training --------------------------------------------------------------------------

def test_meta_train_runs_and_updates_running_stats(model, pool, scaler):
    tasks = build_tasks(pool, 6, 3, 3, RandomStream(47))
    cfg = TrainConfig(inner_steps=1, batch_size=2, max_steps=3)
    result = meta_train(model, tasks, cfg, scaler)
    assert result.steps == 3
    assert len(result.history) == 3
    assert all(np.isfinite(row.loss) for row in result.history)
    assert not torch.equal(result.buffers["bn1.running_mean"], torch.zeros(8, dtype=torch.float64))


def test_meta_train_plateau(model, pool, scaler):
    tasks = build_tasks(pool, 6, 3, 3, RandomStream(48))
    cfg = TrainConfig(inner_steps=1, batch_size=2, meta_plateau_window=1, min_delta=1e9)
    result = meta_train(model, tasks, cfg, scaler)
    assert result.steps == 2


def test_meta_train_needs_tasks(model, scaler):
    with pytest.raises(ValueError):
        meta_train(model, [], TrainConfig(), scaler)


# --- evaluation -----------------------------------------------------------------------------

def test_optimal_labels_reach_ratio_one(pool):
    report = evaluate(label_predictor(list(pool)), list(pool))
    assert np.allclose(report.ratios, 1.0, atol=1e-4)
    assert report.mean_min_sinr_db == pytest.approx(report.optimal_mean_min_sinr_db, abs=1e-6)
    assert report.summary()["count"] == 16
    assert report.summary()["ms_per_channel"] == 0.0


def test_network_never_beats_optimum(model, pretrained, pool, scaler):
    params, buffers = pretrained
    report = evaluate(network_predictor(model, params, buffers, scaler), list(pool))
    assert np.all(report.ratios <= 1.0 + 1e-6)
    assert len(report.rows) == 16


def test_adaptation_sweep(model, pretrained, small_config, scaler):
    adapt, test = split_adaptation(small_config, 4, 6, RandomStream(49))
    params, buffers = pretrained
    ckpt = Checkpoint(network=model.config, params=params, buffers=buffers, scaler=scaler, power_w=adapt.power_w)
    rows = adaptation_sweep(list(adapt), list(test), [2, 4, 99], TrainConfig(adapt_steps=2), pretrained=ckpt, meta=ckpt)
    assert [(r["method"], r["samples"]) for r in rows] == [
        ("finetune", 2), ("finetune", 4), ("meta-adapt", 2), ("meta-adapt", 4)
    ]
    with pytest.raises(ValueError):
        adaptation_sweep(list(adapt), list(test), [2], TrainConfig())


@pytest.mark.slow
def test_meta_adaptation_improves_on_new_scenario():
    source = ScenarioConfig(channel_model=ChannelModel.RAYLEIGH, num_antennas=4, num_users=4, power_dbm=25.0,
                            noise_power_dbm=0.0)
    target = source.model_copy(update={"channel_model": ChannelModel.RICIAN, "rician_factor": 10.0})
    pool = generate_dataset(source, 600, RandomStream(50))
    adapt, test = split_adaptation(target, 20, 200, RandomStream(51))
    scaler = InputScaler.fit(pool.instances())
    model = BeamformingCNN(NetworkConfig(num_antennas=4, num_users=4))
    tasks = build_tasks(pool, 100, 10, 10, RandomStream(52))
    meta = meta_train(model, tasks, TrainConfig(inner_steps=5, batch_size=10, max_epochs=5), scaler)

    before = evaluate(network_predictor(model, meta.params, meta.buffers, scaler), list(test))
    adapted = meta_adapt(model, (meta.params, meta.buffers), list(adapt), TrainConfig(adapt_steps=20), scaler)
    after = evaluate(network_predictor(model, adapted.params, adapted.buffers, scaler), list(test))
    assert after.mean_min_sinr_db >= before.mean_min_sinr_db - 0.1
    assert after.mean_ratio <= 1.0


@pytest.mark.slow
def test_prediction_and_recovery_beat_the_solver():
    instances = [random_instance(900 + i, 8, 8) for i in range(200)]
    model = BeamformingCNN(NetworkConfig(num_antennas=8, num_users=8))
    params, buffers = model.init_params(RandomStream(53))
    scaler = InputScaler.fit(instances)
    predict = network_predictor(model, params, buffers, scaler)

    start = perf_counter()
    for inst in instances:
        solve_balancing(inst)
    solver_s = perf_counter() - start

    start = perf_counter()
    fractions = predict(instances)
    for inst, s in zip(instances, fractions):
        recover_downlink(inst, fractions_to_powers(s, inst.power))
    network_s = perf_counter() - start

    assert network_s * 5 <= solver_s


@pytest.mark.slow
def test_adaptation_strategies_order_on_shifted_scenario():
    """
    Reduced run: 600-pair source pool, 100 meta-tasks, 20 adaptation and 300 test channels.
    Checks the ordering joint < transfer < meta <= matched <= optimal and a meta-to-matched gap
    of at most 1 dB. The 1 dB meta-over-joint margin needs the full-size pools.
    """
    rayleigh = ScenarioConfig(channel_model=ChannelModel.RAYLEIGH, num_antennas=4, num_users=4, power_dbm=25.0,
                              noise_power_dbm=0.0)
    nakagami = rayleigh.model_copy(update={"channel_model": ChannelModel.NAKAGAMI})
    target = rayleigh.model_copy(update={"channel_model": ChannelModel.RICIAN, "rician_factor": 10.0})
    source = merge_datasets([
        generate_dataset(rayleigh, 300, RandomStream(60)),
        generate_dataset(nakagami, 300, RandomStream(61)),
    ])
    adapt, test = split_adaptation(target, 20, 300, RandomStream(62))
    matched = generate_dataset(target, 600, RandomStream(63))
    scaler = InputScaler.fit(source.instances())
    model = BeamformingCNN(NetworkConfig(num_antennas=4, num_users=4))
    offline = TrainConfig(batch_size=20, max_epochs=40)
    adapt_cfg = TrainConfig(adapt_steps=20)
    test = list(test)

    def score(result) -> float:
        return evaluate(network_predictor(model, result.params, result.buffers, scaler), test).mean_min_sinr_db

    joint = score(train_joint(model, source.records + adapt.records, offline, scaler))
    pre = pretrain(model, source.records, offline, scaler)
    transfer = score(fine_tune(model, (pre.params, pre.buffers), list(adapt), adapt_cfg, scaler))
    tasks = build_tasks(source, 100, 10, 10, RandomStream(64))
    meta = meta_train(model, tasks, TrainConfig(inner_steps=5, batch_size=10, max_epochs=10), scaler)
    meta_db = score(meta_adapt(model, (meta.params, meta.buffers), list(adapt), adapt_cfg, scaler))
    bnn = score(train_joint(model, matched.records, offline, scaler))
    optimal = evaluate(label_predictor(test), test).mean_min_sinr_db

    assert joint < transfer < meta_db <= bnn <= optimal
    assert bnn - meta_db <= 1.0
