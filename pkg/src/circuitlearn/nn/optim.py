"""Adam with bias correction, operating on ModelParams in place."""

from __future__ import annotations

import numpy as np

from .params import ModelParams


def init_adam_state() -> dict:
    return {"t": 0, "m": {}, "v": {}}


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: dict,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> dict:
    """One first/second-moment update; missing or zero grads leave the
    corresponding parameters untouched only via a zero step, never skipped,
    so the moment decay stays consistent across parameters."""
    state["t"] += 1
    t = state["t"]
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, tensor in params.tensors.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(tensor.data)
        m = state["m"].get(name)
        v = state["v"].get(name)
        if m is None:
            m = np.zeros_like(tensor.data, dtype=np.float32)
            v = np.zeros_like(tensor.data, dtype=np.float32)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        state["m"][name] = m
        state["v"][name] = v
        step = lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        tensor.data = (tensor.data - step).astype(tensor.data.dtype, copy=False)
    return state
