"""
Convolutional regressor for uplink power fractions, written as a pure function of an ordered
parameter dict so inner-loop updates stay differentiable.

conv -> BN -> ReLU -> conv -> BN -> ReLU -> flatten -> FC -> Sigmoid, float64 throughout.
"""
import math
from collections import OrderedDict
from typing import Dict, Optional, Tuple

import torch
import torch.nn.functional as F

from app.errors import ShapeMismatch
from app.numerics import RandomStream
from app.schemas.training import NetworkConfig

Params = Dict[str, torch.Tensor]

DTYPE = torch.float64
FC_NAMES = ("fc.weight", "fc.bias")


def parameter_count(M: int, K: int, channels: int = 8, kernel_size: int = 3) -> int:
    kk = kernel_size * kernel_size
    conv1 = channels * 2 * kk + channels
    conv2 = channels * channels * kk + channels
    bn = 2 * channels
    fc = K * channels * K * M + K
    return conv1 + bn + conv2 + bn + fc


class BeamformingCNN:
    def __init__(self, config: NetworkConfig):
        self.config = config
        self.M = config.num_antennas
        self.K = config.num_users
        self.channels = config.channels
        self.kernel_size = config.kernel_size
        self.padding = config.kernel_size // 2

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return 2, self.K, self.M

    def shapes(self) -> "OrderedDict[str, Tuple[int, ...]]":
        c, k = self.channels, self.kernel_size
        return OrderedDict([
            ("conv1.weight", (c, 2, k, k)),
            ("conv1.bias", (c,)),
            ("bn1.weight", (c,)),
            ("bn1.bias", (c,)),
            ("conv2.weight", (c, c, k, k)),
            ("conv2.bias", (c,)),
            ("bn2.weight", (c,)),
            ("bn2.bias", (c,)),
            ("fc.weight", (self.K, c * self.K * self.M)),
            ("fc.bias", (self.K,)),
        ])

    def buffer_shapes(self) -> "OrderedDict[str, Tuple[int, ...]]":
        c = self.channels
        return OrderedDict([
            ("bn1.running_mean", (c,)),
            ("bn1.running_var", (c,)),
            ("bn2.running_mean", (c,)),
            ("bn2.running_var", (c,)),
        ])

    def parameter_count(self) -> int:
        return parameter_count(self.M, self.K, self.channels, self.kernel_size)

    def init_params(self, stream: RandomStream) -> Tuple[Params, Params]:
        """Uniform fan-in weights, zero biases, BN scale 1 and shift 0; running stats at (0, 1)."""
        gen = torch.Generator().manual_seed(stream.torch_seed())
        params: Params = OrderedDict()
        for name, shape in self.shapes().items():
            if name.endswith(".weight") and not name.startswith("bn"):
                fan_in = math.prod(shape[1:])
                bound = 1.0 / math.sqrt(fan_in)
                value = (torch.rand(shape, generator=gen, dtype=DTYPE) * 2.0 - 1.0) * bound
            elif name.startswith("bn") and name.endswith(".weight"):
                value = torch.ones(shape, dtype=DTYPE)
            else:
                value = torch.zeros(shape, dtype=DTYPE)
            params[name] = value.requires_grad_(True)
        return params, self.init_buffers()

    def init_buffers(self) -> Params:
        buffers: Params = OrderedDict()
        for name, shape in self.buffer_shapes().items():
            fill = torch.ones if name.endswith("running_var") else torch.zeros
            buffers[name] = fill(shape, dtype=DTYPE)
        return buffers

    def _bn(self, x, params: Params, buffers: Optional[Params], layer: str, mode: str, update_stats: bool):
        cfg = self.config
        if mode == "eval":
            if buffers is None:
                raise ValueError("eval mode needs running statistics")
            return F.batch_norm(
                x, buffers[f"{layer}.running_mean"], buffers[f"{layer}.running_var"],
                params[f"{layer}.weight"], params[f"{layer}.bias"],
                training=False, eps=cfg.bn_eps,
            )
        running = update_stats and buffers is not None
        return F.batch_norm(
            x,
            buffers[f"{layer}.running_mean"] if running else None,
            buffers[f"{layer}.running_var"] if running else None,
            params[f"{layer}.weight"], params[f"{layer}.bias"],
            training=True, momentum=cfg.bn_momentum, eps=cfg.bn_eps,
        )

    def forward(
        self,
        params: Params,
        x: torch.Tensor,
        buffers: Optional[Params] = None,
        mode: str = "train",
        update_stats: bool = False,
    ) -> torch.Tensor:
        """
        Batch of (N, 2, K, M) inputs to (N, K) outputs in (0, 1).
        Train mode normalizes with batch statistics and only writes running statistics
        when `update_stats` is set; eval mode reads them.
        """
        if mode not in ("train", "eval"):
            raise ValueError(f"unknown mode {mode!r}")
        if x.ndim != 4 or tuple(x.shape[1:]) != self.input_shape:
            raise ShapeMismatch(f"expected (N, {2}, {self.K}, {self.M}) input, got {tuple(x.shape)}")
        h = F.conv2d(x, params["conv1.weight"], params["conv1.bias"], padding=self.padding)
        h = F.relu(self._bn(h, params, buffers, "bn1", mode, update_stats))
        h = F.conv2d(h, params["conv2.weight"], params["conv2.bias"], padding=self.padding)
        h = F.relu(self._bn(h, params, buffers, "bn2", mode, update_stats))
        h = h.flatten(start_dim=1)
        return torch.sigmoid(F.linear(h, params["fc.weight"], params["fc.bias"]))

    __call__ = forward
