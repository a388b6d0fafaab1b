"""
Command-line entry point: `python -m app.cli <command> [--config FILE] [flags]`.

Every command validates its JSON config, with flags overriding fields, against one of the
documents in `app.schemas.experiment` and echoes the merged result into its outputs.
Relative input and output paths resolve against `settings.DATA_DIR`.

Exit codes:
    0  success
    1  any other library error
    2  invalid config, flags or input files
    3  dataset generation aborted (solver failure rate exceeded)
    4  non-finite training loss
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type

import numpy as np
import torch
from pydantic import BaseModel, ValidationError

from app.adapt.evaluate import evaluate, label_predictor, network_predictor
from app.adapt.metrics import Stopwatch, write_csv, write_json
from app.adapt.offline import fine_tune, meta_adapt, meta_train, pretrain, train_joint
from app.adapt.online import run_schedule
from app.adapt.sweep import adaptation_sweep
from app.balancing.solver import solve_balancing
from app.config import settings
from app.datasets.generate import generate_dataset, verify_labels
from app.datasets.records import DatasetFile, merge_datasets
from app.datasets.tasks import build_tasks, split_adaptation, tasks_from_index
from app.errors import (
    BeamformingError,
    CorruptPayload,
    DatasetGenerationError,
    InvalidConfig,
    NonFiniteLoss,
    VersionMismatch,
)
from app.net.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from app.net.model import BeamformingCNN
from app.net.scaler import InputScaler
from app.numerics.random import RandomStream
from app.schemas.api import InstanceIn, SolveResponse
from app.schemas.experiment import (
    AdaptExperiment,
    EvalExperiment,
    GenDataExperiment,
    OnlineExperiment,
    SplitExperiment,
    TasksExperiment,
    TrainExperiment,
)
from app.schemas.training import NetworkConfig, TrainConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_NON_FINITE = 4

# fields that change how a command runs but never what it writes
EXECUTION_ONLY = {"workers"}


# --- config plumbing ---------------------------------------------------------------------------

def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InvalidConfig(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path} is not valid JSON: {exc}") from exc


def _resolve(path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(settings.DATA_DIR) / p


def _existing(path: str) -> Path:
    p = _resolve(path)
    if not p.exists():
        raise InvalidConfig(f"input file not found: {p}")
    return p


def _wrap_bare(doc: Dict[str, Any], key: str, detect: Callable[[Dict[str, Any]], bool]) -> Dict[str, Any]:
    """Accept a bare ScenarioConfig / TrainConfig document where a full experiment is expected."""
    if not detect(doc):
        return doc
    wrapped: Dict[str, Any] = {key: doc}
    if "seed" in doc:
        wrapped["seed"] = doc["seed"]
    return wrapped


def _is_scenario(doc: Dict[str, Any]) -> bool:
    return "channel_model" in doc


def _is_train(doc: Dict[str, Any]) -> bool:
    return bool(doc) and set(doc) <= set(TrainConfig.model_fields)


def _experiment(
    model: Type[BaseModel],
    config_path: Optional[str],
    overrides: Dict[str, Any],
    bare: Optional[Tuple[str, Callable[[Dict[str, Any]], bool]]] = None,
):
    doc: Dict[str, Any] = {}
    if config_path:
        loaded = _read_json(config_path)
        if not isinstance(loaded, dict):
            raise InvalidConfig(f"{config_path} must hold a JSON object")
        doc = _wrap_bare(loaded, *bare) if bare else loaded
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return model.model_validate(doc)
    except ValidationError as exc:
        raise InvalidConfig(str(exc)) from exc


def _effective(experiment: BaseModel) -> Dict[str, Any]:
    """The merged config echoed into outputs; execution-only knobs are left out."""
    return experiment.model_dump(mode="json", exclude=EXECUTION_ONLY)


def _worker_count(experiment: BaseModel) -> int:
    workers = getattr(experiment, "workers", None)
    return settings.WORKERS if workers is None else workers


def _load_pool(paths: Sequence[str]) -> DatasetFile:
    files = [DatasetFile.read(_existing(p)) for p in paths]
    return files[0] if len(files) == 1 else merge_datasets(files)


def _check_compatible(ckpt: Checkpoint, num_antennas: int, num_users: int, power_w: float, what: str) -> None:
    expected = (ckpt.network.num_antennas, ckpt.network.num_users)
    if expected != (num_antennas, num_users) or not np.isclose(ckpt.power_w, power_w, rtol=1e-12):
        raise InvalidConfig(
            f"{what} is (M={num_antennas}, K={num_users}, P={power_w:.6g} W) but the checkpoint expects "
            f"(M={expected[0]}, K={expected[1]}, P={ckpt.power_w:.6g} W)"
        )


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, sort_keys=True))


# --- commands ----------------------------------------------------------------------------------

def cmd_gen_data(args: argparse.Namespace) -> int:
    exp = _experiment(
        GenDataExperiment,
        args.config,
        {"out": args.out, "count": args.count, "seed": args.seed, "workers": args.workers},
        bare=("scenario", _is_scenario),
    )
    config = _effective(exp)
    dataset = generate_dataset(
        exp.scenario, exp.count, RandomStream(exp.seed), workers=_worker_count(exp), effective=config
    )
    if args.verify:
        failed = verify_labels(dataset)
        if failed:
            raise DatasetGenerationError(f"{len(failed)} labels failed the self-check, first at record {failed[0]}")
    path = dataset.write(_resolve(exp.out))
    summary = {k: dataset.header[k] for k in ("num_antennas", "num_users", "power_dbm", "count", "redraws", "seed")}
    _emit({**summary, "channel_model": exp.scenario.channel_model.value, "path": str(path), "sha256": dataset.digest()})
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    exp = _experiment(
        SplitExperiment,
        args.config,
        {
            "n_adapt": args.n_adapt,
            "n_test": args.n_test,
            "out_adapt": args.out_adapt,
            "out_test": args.out_test,
            "seed": args.seed,
            "workers": args.workers,
        },
        bare=("scenario", _is_scenario),
    )
    adapt, test = split_adaptation(
        exp.scenario, exp.n_adapt, exp.n_test, RandomStream(exp.seed), workers=_worker_count(exp)
    )
    out = {}
    for name, dataset, target in (("adapt", adapt, exp.out_adapt), ("test", test, exp.out_test)):
        dataset.header["effective"] = _effective(exp)
        path = dataset.write(_resolve(target))
        out[name] = {"path": str(path), "count": len(dataset), "sha256": dataset.digest()}
    _emit(out)
    return EXIT_OK


def cmd_tasks(args: argparse.Namespace) -> int:
    exp = _experiment(
        TasksExperiment,
        args.config,
        {
            "data": args.data,
            "num_tasks": args.num_tasks,
            "n_support": args.n_support,
            "n_query": args.n_query,
            "out": args.out,
            "seed": args.seed,
        },
    )
    pool = _load_pool(exp.data)
    tasks = build_tasks(pool, exp.num_tasks, exp.n_support, exp.n_query, RandomStream(exp.seed))
    path = write_json(_resolve(exp.out), {
        "config": _effective(exp),
        "pool": pool.digest(),
        "pool_size": len(pool),
        "tasks": [t.to_dict() for t in tasks],
    })
    _emit({"path": str(path), "num_tasks": len(tasks), "pool_size": len(pool)})
    return EXIT_OK


def _meta_tasks(exp: TrainExperiment, pool: DatasetFile):
    if exp.tasks is None:
        return build_tasks(pool, exp.num_tasks, exp.n_support, exp.n_query, RandomStream(exp.seed))
    index = _read_json(str(_existing(exp.tasks)))
    if index.get("pool") != pool.digest():
        raise InvalidConfig(f"task index {exp.tasks} was built from a different pool")
    return tasks_from_index(pool, index["tasks"])


def cmd_train(args: argparse.Namespace) -> int:
    exp = _experiment(
        TrainExperiment,
        args.config,
        {
            "method": args.method,
            "data": args.data,
            "tasks": args.tasks,
            "num_tasks": args.num_tasks,
            "out": args.out,
            "metrics": args.metrics,
            "seed": args.seed,
            "workers": args.workers,
        },
        bare=("train", _is_train),
    )
    config = _effective(exp)
    pool = _load_pool(exp.data)
    scaler = InputScaler.fit(pool.instances())
    network = NetworkConfig(
        num_antennas=pool.num_antennas,
        num_users=pool.num_users,
        **exp.network.model_dump(),
    )
    model = BeamformingCNN(network)

    if exp.method == "meta":
        result = meta_train(model, _meta_tasks(exp, pool), exp.train, scaler, workers=_worker_count(exp))
    elif exp.method == "pretrain":
        result = pretrain(model, pool.records, exp.train, scaler)
    else:
        result = train_joint(model, pool.records, exp.train, scaler)

    ckpt = Checkpoint(
        network=network,
        params=result.params,
        buffers=result.buffers,
        scaler=scaler,
        power_w=pool.power_w,
        meta={
            "method": exp.method,
            "scenario": pool.header["scenario"],
            "power_dbm": pool.header["power_dbm"],
            "pool": pool.digest(),
            "steps": result.steps,
            "config": config,
        },
    )
    out = save_checkpoint(_resolve(exp.out), ckpt)
    metrics = _resolve(exp.metrics) if exp.metrics else out.with_suffix(".csv")
    write_csv(metrics, result.history, header_comment=config)
    _emit({"checkpoint": str(out), "metrics": str(metrics), "steps": result.steps, "final_loss": result.final_loss})
    return EXIT_OK


def cmd_adapt(args: argparse.Namespace) -> int:
    exp = _experiment(
        AdaptExperiment,
        args.config,
        {
            "method": args.method,
            "checkpoint": args.checkpoint,
            "adapt_data": args.adapt_data,
            "out": args.out,
            "metrics": args.metrics,
            "seed": args.seed,
        },
        bare=("train", _is_train),
    )
    ckpt = load_checkpoint(_existing(exp.checkpoint))
    data = DatasetFile.read(_existing(exp.adapt_data))
    _check_compatible(ckpt, data.num_antennas, data.num_users, data.power_w, "adaptation data")

    adapt = fine_tune if exp.method == "finetune" else meta_adapt
    clock = Stopwatch()
    result = adapt(ckpt.model, (ckpt.params, ckpt.buffers), data.records, exp.train, ckpt.scaler)
    adaptation_ms = clock.ms()

    config = {**_effective(exp), "adaptation_ms": adaptation_ms}
    adapted = Checkpoint(
        network=ckpt.network,
        params=result.params,
        buffers=result.buffers,
        scaler=ckpt.scaler,
        power_w=ckpt.power_w,
        meta={
            "method": exp.method,
            "scenario": data.header["scenario"],
            "power_dbm": data.header["power_dbm"],
            "source": {k: ckpt.meta.get(k) for k in ("method", "scenario", "pool")},
            "samples": len(data),
            "adaptation_ms": adaptation_ms,
            "config": config,
        },
    )
    out = save_checkpoint(_resolve(exp.out), adapted)
    metrics = _resolve(exp.metrics) if exp.metrics else out.with_suffix(".csv")
    write_csv(metrics, result.history, header_comment=config)
    _emit({"checkpoint": str(out), "metrics": str(metrics), "final_loss": result.final_loss,
           "adaptation_ms": adaptation_ms})
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    exp = _experiment(
        EvalExperiment,
        args.config,
        {
            "checkpoint": args.checkpoint,
            "test_data": args.test_data,
            "report": args.report,
            "use_labels": True if args.use_labels else None,
            "sweep": _read_json(args.sweep) if args.sweep else None,
            "seed": args.seed,
        },
    )
    test = DatasetFile.read(_existing(exp.test_data))
    if exp.use_labels:
        predictor = label_predictor(test.records)
    else:
        if exp.checkpoint is None:
            raise InvalidConfig("eval needs --checkpoint unless --use-labels is given")
        ckpt = load_checkpoint(_existing(exp.checkpoint))
        _check_compatible(ckpt, test.num_antennas, test.num_users, test.power_w, "test data")
        predictor = network_predictor(ckpt.model, ckpt.params, ckpt.buffers, ckpt.scaler)

    report = evaluate(predictor, test.records)
    payload: Dict[str, Any] = {"config": _effective(exp), "summary": report.summary(), "rows": report.rows}

    if exp.sweep is not None:
        sweep = exp.sweep
        if sweep.pretrain_checkpoint is None and sweep.meta_checkpoint is None:
            raise InvalidConfig("the sweep needs pretrain_checkpoint or meta_checkpoint")
        adaptation = DatasetFile.read(_existing(sweep.adapt_data))
        loaded: Dict[str, Optional[Checkpoint]] = {}
        for key, ref in (("pretrained", sweep.pretrain_checkpoint), ("meta", sweep.meta_checkpoint)):
            loaded[key] = None if ref is None else load_checkpoint(_existing(ref))
            if loaded[key] is not None:
                _check_compatible(loaded[key], test.num_antennas, test.num_users, test.power_w, "test data")
        payload["sweep"] = adaptation_sweep(adaptation.records, test.records, sweep.sizes, sweep.train, **loaded)

    path = write_json(_resolve(exp.report), payload)
    _emit({"report": str(path), **report.summary()})
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        body = InstanceIn.model_validate(_read_json(args.instance_json))
        instance = body.to_instance()
    except ValidationError as exc:
        raise InvalidConfig(str(exc)) from exc
    uplink, downlink = solve_balancing(instance)
    response = SolveResponse.from_result(uplink, downlink)
    text = response.model_dump_json()
    if args.out:
        out = _resolve(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_online(args: argparse.Namespace) -> int:
    strategies: Optional[List[str]] = None
    if args.strategies:
        strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    exp = _experiment(
        OnlineExperiment,
        args.config,
        {
            "schedule": _read_json(args.schedule) if args.schedule else None,
            "strategies": strategies,
            "meta_checkpoint": args.meta_checkpoint,
            "report": args.report,
            "segments_report": args.segments_report,
            "seed": args.seed,
            "workers": args.workers,
        },
    )
    ckpt = load_checkpoint(_existing(exp.meta_checkpoint))
    first = exp.schedule.segments[0].scenario
    _check_compatible(ckpt, first.num_antennas, first.num_users, first.power_w, "the schedule")

    report = run_schedule(exp.schedule, exp.strategies, ckpt, exp.train, exp.seed, workers=_worker_count(exp))
    config = _effective(exp)
    slots = write_csv(_resolve(exp.report), report.rows, header_comment=config)
    segments_path = _resolve(exp.segments_report) if exp.segments_report else slots.with_suffix(".segments.json")
    write_json(segments_path, {"config": config, "segments": report.segments})
    _emit({"report": str(slots), "segments": report.segments})
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port, log_level=settings.LOG_LEVEL.lower())
    return EXIT_OK


# --- parser ------------------------------------------------------------------------------------

def _workers(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("--workers must be at least 1")
    return n


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.cli",
        description="Max-min SINR beamforming: data generation, training, adaptation and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler: Callable[[argparse.Namespace], int], help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON experiment document; flags override its fields")
        p.set_defaults(handler=handler)
        return p

    p = command("gen-data", cmd_gen_data, "Generate a labelled dataset for one scenario")
    p.add_argument("--out")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=_workers)
    p.add_argument("--verify", action="store_true", help="Re-solve every record and check its label")

    p = command("split", cmd_split, "Generate adaptation and test sets for one scenario")
    p.add_argument("--n-adapt", dest="n_adapt", type=int)
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("--out-adapt", dest="out_adapt")
    p.add_argument("--out-test", dest="out_test")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=_workers)

    p = command("tasks", cmd_tasks, "Sample a task index (support/query ids) from dataset pools")
    p.add_argument("--data", nargs="+")
    p.add_argument("--num-tasks", dest="num_tasks", type=int)
    p.add_argument("--n-support", dest="n_support", type=int)
    p.add_argument("--n-query", dest="n_query", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)

    p = command("train", cmd_train, "Joint training, pre-training or meta-training")
    p.add_argument("--method", choices=["joint", "pretrain", "meta"])
    p.add_argument("--data", nargs="+")
    p.add_argument("--tasks", help="Task index written by the tasks command")
    p.add_argument("--num-tasks", dest="num_tasks", type=int)
    p.add_argument("--out")
    p.add_argument("--metrics")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=_workers, help="Bound on meta-batch parallelism")

    p = command("adapt", cmd_adapt, "Fine-tune (FC only) or meta-adapt (all layers) a checkpoint")
    p.add_argument("--method", choices=["finetune", "meta-adapt"])
    p.add_argument("--checkpoint")
    p.add_argument("--adapt-data", dest="adapt_data")
    p.add_argument("--out")
    p.add_argument("--metrics")
    p.add_argument("--seed", type=int)

    p = command("eval", cmd_eval, "Score a checkpoint (or the stored labels) on a test set")
    p.add_argument("--checkpoint")
    p.add_argument("--test-data", dest="test_data")
    p.add_argument("--report")
    p.add_argument("--use-labels", dest="use_labels", action="store_true")
    p.add_argument("--sweep", help="JSON sweep document: adaptation sizes and checkpoints")
    p.add_argument("--seed", type=int)

    p = command("solve", cmd_solve, "Solve one instance to optimality")
    p.add_argument("--instance-json", dest="instance_json", required=True)
    p.add_argument("--out")

    p = command("online", cmd_online, "Run the online strategies over a scenario schedule")
    p.add_argument("--schedule", help="JSON schedule document")
    p.add_argument("--strategies", help="Comma-separated subset of the strategies")
    p.add_argument("--meta-checkpoint", dest="meta_checkpoint")
    p.add_argument("--report")
    p.add_argument("--segments-report", dest="segments_report")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=_workers, help="Bound on meta-batch and data-generation parallelism")

    p = sub.add_parser("serve", help="Start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=cmd_serve)

    return parser


def _configure_runtime() -> None:
    logging.basicConfig(
        level=settings.LOG_LEVEL.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    torch.set_num_threads(settings.TORCH_NUM_THREADS)
    torch.use_deterministic_algorithms(True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    _configure_runtime()
    try:
        return args.handler(args)
    except NonFiniteLoss as exc:
        logger.error("training diverged: %s", exc)
        return EXIT_NON_FINITE
    except DatasetGenerationError as exc:
        logger.error("dataset generation aborted: %s", exc)
        return EXIT_GENERATION
    except (InvalidConfig, VersionMismatch, CorruptPayload, ValueError, FileNotFoundError) as exc:
        logger.error("%s: %s", args.command, exc)
        return EXIT_CONFIG
    except BeamformingError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
