"""Training objectives: mean absolute error and the contrastive
normalized-temperature cross entropy over cosine similarities."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor

_NORM_EPS = 1e-12


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error; subgradient uses sign(0) := 0."""
    if pred.shape != target.shape:
        raise ShapeError(f"l1_loss: shapes differ, {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    data = np.abs(diff).mean(dtype=pred.dtype)

    def backward(g):
        n = diff.size
        T._accumulate(pred, g * np.sign(diff) / n)
        T._accumulate(target, -g * np.sign(diff) / n)

    return T._make(data, (pred, target), backward)


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    """Cosine of two equal-width embedding vectors."""
    if a.shape != b.shape:
        raise ShapeError(f"cosine: shapes differ, {a.shape} vs {b.shape}")
    dot = T.sum_(T.mul(a, b))
    na = T.sqrt(T.sum_(T.mul(a, a)) + _NORM_EPS)
    nb = T.sqrt(T.sum_(T.mul(b, b)) + _NORM_EPS)
    return T.div(dot, T.mul(na, nb))


def info_nce_loss(
    query: Tensor,
    positive: Tensor,
    negatives: Sequence[Tensor],
    temperature: float,
) -> Tensor:
    """-log( e^(s+ / t) / (e^(s+ / t) + sum_k e^(sk / t)) ), s = cosine.

    With no negatives the loss is exactly 0.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    sims = [cosine_similarity(query, positive)]
    sims.extend(cosine_similarity(query, n) for n in negatives)
    logits = T.concat([T.reshape(s, (1,)) for s in sims], axis=0)
    logits = T.mul(logits, Tensor(np.float32(1.0 / temperature)))
    log_probs = T.log_softmax(logits, axis=0)
    return T.mul(log_probs[0], Tensor(np.float32(-1.0)))
