"""
Loss, gradients and parameter updates over ordered parameter dicts.
"""
from collections import OrderedDict
from typing import Iterable, Optional

import torch

from app.errors import GraphNotRecorded, NonFiniteLoss, ShapeMismatch
from app.net.model import Params

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


def mse_loss(predictions: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """(1/N) sum_i ||q_hat_i - q_i||^2."""
    if predictions.shape != labels.shape:
        raise ShapeMismatch(f"predictions {tuple(predictions.shape)} vs labels {tuple(labels.shape)}")
    if predictions.ndim != 2 or predictions.shape[0] < 1:
        raise ShapeMismatch("expected a non-empty (N, K) batch")
    return ((predictions - labels) ** 2).sum(dim=1).mean()


def check_finite(loss: torch.Tensor, where: str) -> None:
    if not torch.isfinite(loss).all():
        raise NonFiniteLoss(f"non-finite loss during {where}")


def grad(loss: torch.Tensor, params: Params, create_graph: bool = False) -> Params:
    """
    Gradients of a scalar loss with respect to every tensor in `params`.
    With create_graph the result is itself differentiable.
    """
    if loss.ndim != 0:
        raise ShapeMismatch("loss must be a scalar")
    if loss.grad_fn is None and not loss.requires_grad:
        raise GraphNotRecorded("loss was computed without a recorded graph")
    names = list(params)
    grads = torch.autograd.grad(
        loss, [params[n] for n in names], create_graph=create_graph, allow_unused=True
    )
    return OrderedDict(
        (n, g if g is not None else torch.zeros_like(params[n])) for n, g in zip(names, grads)
    )


def sgd_step(params: Params, grads: Params, lr: float, only: Optional[Iterable[str]] = None) -> Params:
    """theta - lr * g as new tensors; names outside `only` pass through untouched."""
    if list(params) != list(grads):
        raise ShapeMismatch("parameter and gradient names differ")
    selected = set(params) if only is None else set(only)
    out = OrderedDict()
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: gradient {tuple(g.shape)} vs parameter {tuple(p.shape)}")
        out[name] = p - lr * g if name in selected else p
    return out


def detach_params(params: Params, requires_grad: bool = True) -> Params:
    """Fresh leaf copies, cut from any graph."""
    return OrderedDict((n, p.detach().clone().requires_grad_(requires_grad)) for n, p in params.items())


def make_adam(params: Params, lr: float, names: Optional[Iterable[str]] = None) -> torch.optim.Adam:
    """Adam over the leaf tensors in `params` (all of them unless `names` is given)."""
    names = list(params) if names is None else list(names)
    return torch.optim.Adam([params[n] for n in names], lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS)


def adam_step(optimizer: torch.optim.Adam, params: Params, grads: Params):
    """One in-place Adam update of the leaves the optimizer owns; returns (optimizer, params)."""
    owned = {id(p) for group in optimizer.param_groups for p in group["params"]}
    for name, p in params.items():
        if id(p) in owned:
            p.grad = grads[name].detach().clone()
    optimizer.step()
    for p in params.values():
        if id(p) in owned:
            p.grad = None
    return optimizer, params
