"""Evaluation metrics: regression quality and retrieval recall."""

from __future__ import annotations

import numpy as np


def eval_regression(preds, targets) -> dict:
    """MAE and R^2 (1 - SS_res/SS_tot about the target mean).

    When all targets are equal R^2 is undefined: it is reported as NaN with
    ``degenerate_targets`` set instead of raising, so callers can log it.
    """
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {targets.shape}")
    if preds.size < 2:
        raise ValueError("need at least 2 values")
    mae = float(np.abs(preds - targets).mean())
    ss_res = float(((preds - targets) ** 2).sum())
    ss_tot = float(((targets - targets.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return {"mae": mae, "r2": float("nan"), "degenerate_targets": True}
    return {"mae": mae, "r2": 1.0 - ss_res / ss_tot, "degenerate_targets": False}


def cosine_matrix(queries: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Cosines between query q and its own candidate list.

    queries [Q, D]; candidates [Q, N, D]; returns [Q, N].
    """
    qn = queries / np.maximum(np.linalg.norm(queries, axis=-1, keepdims=True), 1e-12)
    cn = candidates / np.maximum(
        np.linalg.norm(candidates, axis=-1, keepdims=True), 1e-12
    )
    return np.einsum("qd,qnd->qn", qn, cn)


def recall_at_k(
    queries: np.ndarray,
    candidates: np.ndarray,
    positive_index: int,
    k_list: list[int],
) -> dict[int, float]:
    """Fraction of queries whose positive candidate ranks within top k by
    cosine.  Rank = 1 + number of strictly closer candidates."""
    sims = cosine_matrix(queries, candidates)
    pos = sims[:, positive_index]
    ranks = 1 + (sims > pos[:, None]).sum(axis=1)
    return {k: float((ranks <= k).mean()) for k in k_list}
