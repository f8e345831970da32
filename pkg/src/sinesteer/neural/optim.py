from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from .layers import Parameter

DEFAULT_BETAS = (0.9, 0.999)
DEFAULT_EPS = 1e-8
# "frontend" is reserved for a pretrained feature extractor; nothing uses it yet.
DEFAULT_LR_GROUPS = {"trunk": 1e-3, "head": 1e-3, "frontend": 1e-5}


def adam_step(
    params: Iterable[Parameter],
    lr_groups: Mapping[str, float],
    t: int,
    betas: tuple[float, float] = DEFAULT_BETAS,
    eps: float = DEFAULT_EPS,
) -> None:
    """One bias-corrected Adam update, in place. ``t`` is the 1-based step count."""
    if t < 1:
        raise ValueError(f"Adam step count must be >= 1, got {t}")
    b1, b2 = betas
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p in params:
        lr = lr_groups[p.group]
        p.adam_m *= b1
        p.adam_m += (1.0 - b1) * p.grad
        p.adam_v *= b2
        p.adam_v += (1.0 - b2) * p.grad * p.grad
        if lr == 0.0:
            continue
        p.value -= lr * (p.adam_m / c1) / (np.sqrt(p.adam_v / c2) + eps)


def global_grad_norm(params: Iterable[Parameter]) -> float:
    return float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params)))


def clip_grad_norm(params: Iterable[Parameter], max_norm: float) -> float:
    """Rescale all gradients so their joint L2 norm is at most ``max_norm``; returns the pre-clip norm."""
    params = list(params)
    norm = global_grad_norm(params)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in params:
            p.grad *= scale
    return norm
