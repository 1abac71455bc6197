"""Finite-difference verification of backward passes."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def grad_check(
    f: Callable[..., Tensor],
    tensors: Sequence[Tensor],
    eps: float = 1e-3,
) -> float:
    """Max relative error between backward() and central differences.

    ``f`` must return a scalar Tensor.  Every coordinate of every input
    tensor with requires_grad is perturbed by +-eps.  Relative error is
    |fd - an| / max(|fd|, |an|, 1e-8).
    """
    out = f(*tensors)
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    for t in tensors:
        t.grad = None
    out.backward()

    worst = 0.0
    for t in tensors:
        if not t.requires_grad:
            continue
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f(*tensors).data)
            flat[i] = orig - eps
            lo = float(f(*tensors).data)
            flat[i] = orig
            fd = (hi - lo) / (2.0 * eps)
            an = float(analytic.reshape(-1)[i])
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
            worst = max(worst, rel)
    return worst
