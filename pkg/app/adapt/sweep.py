import logging
from typing import Dict, List, Optional, Sequence, Tuple

from app.adapt.evaluate import evaluate, network_predictor
from app.adapt.metrics import Stopwatch
from app.adapt.offline import fine_tune, meta_adapt
from app.datasets.records import SamplePair
from app.net.checkpoint import Checkpoint
from app.schemas.training import TrainConfig

logger = logging.getLogger(__name__)


def adaptation_sweep(
    adaptation: Sequence[SamplePair],
    test: Sequence[SamplePair],
    sizes: Sequence[int],
    config: TrainConfig,
    *,
    pretrained: Optional[Checkpoint] = None,
    meta: Optional[Checkpoint] = None,
) -> List[Dict]:
    """Mean min-SINR after fine-tuning / meta-adapting on the first n adaptation records, per n."""
    methods: List[Tuple[str, Checkpoint]] = []
    if pretrained is not None:
        methods.append(("finetune", pretrained))
    if meta is not None:
        methods.append(("meta-adapt", meta))
    if not methods:
        raise ValueError("the sweep needs a pre-trained or a meta checkpoint")

    rows = []
    for name, ckpt in methods:
        adapt = fine_tune if name == "finetune" else meta_adapt
        for n in sizes:
            if n > len(adaptation):
                logger.warning("skipping n=%d: only %d adaptation records", n, len(adaptation))
                continue
            clock = Stopwatch()
            result = adapt(ckpt.model, (ckpt.params, ckpt.buffers), adaptation[:n], config, ckpt.scaler)
            adapt_ms = clock.ms()
            report = evaluate(network_predictor(ckpt.model, result.params, result.buffers, ckpt.scaler), test)
            rows.append({
                "method": name,
                "samples": n,
                "mean_min_sinr_db": report.mean_min_sinr_db,
                "mean_ratio_to_optimal": report.mean_ratio,
                "adaptation_ms": adapt_ms,
            })
    return rows
