"""AdamW with decoupled weight decay, warmup-cosine schedule, layer-wise LR decay."""

from __future__ import annotations

import math

import numpy as np


def adamw_step(param, grad, m, v, lr, wd, t, beta1=0.9, beta2=0.999, eps=1e-8):
    """One AdamW update. Returns ``(param, m, v)`` as new arrays.

    Decay is decoupled from the adaptive step:
    ``p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p``.
    """
    if t < 1:
        raise ValueError("step counter t starts at 1")
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    m = beta1 * np.asarray(m, dtype=np.float64) + (1 - beta1) * grad
    v = beta2 * np.asarray(v, dtype=np.float64) + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    new = param - lr * (m_hat / (np.sqrt(v_hat) + eps)) - lr * wd * param
    return new, m, v


def lr_at(t: float, base_lr: float, epochs: float, warmup_epochs: float) -> float:
    """Learning rate at fractional epoch ``t``: linear warmup from 0, then cosine to 0."""
    if t < warmup_epochs:
        return base_lr * t / warmup_epochs
    span = epochs - warmup_epochs
    progress = min(max((t - warmup_epochs) / span, 0.0), 1.0)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def layer_lr_scale(layer_index: int, num_layers: int, decay: float) -> float:
    """``decay ** (num_layers - layer_index)``; the head sits at ``num_layers``."""
    if not 0 <= layer_index <= num_layers:
        raise ValueError(f"layer index {layer_index} outside [0, {num_layers}]")
    return decay ** (num_layers - layer_index)
