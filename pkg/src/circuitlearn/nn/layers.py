"""Layers built on the autodiff ops: linear maps, masked multi-head
attention, affine layer norm, and the feed-forward block.

Attention, layer norm and the FFN are single tape nodes with hand-written
backward passes; sequences here are tiny (operator plus fan-in), so fusing
keeps the tape short where it matters.  All backward formulas are covered
by finite-difference tests.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    out = T.matmul(x, w)
    if b is not None:
        out = T.add(out, b)
    return out


def _norm_forward(x: np.ndarray, eps: float):
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    return centered * inv, inv


def _norm_backward(g_y: np.ndarray, y: np.ndarray, inv: np.ndarray) -> np.ndarray:
    g_mean = g_y.mean(axis=-1, keepdims=True)
    gy_mean = (g_y * y).mean(axis=-1, keepdims=True)
    return inv * (g_y - g_mean - y * gy_mean)


def layer_norm_affine(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Last-axis layer norm followed by a learned elementwise affine."""
    y, inv = _norm_forward(x.data, eps)
    data = y * gain.data + bias.data

    def backward(g):
        bdims = tuple(range(g.ndim - 1))
        T._accumulate(bias, g.sum(axis=bdims))
        T._accumulate(gain, (g * y).sum(axis=bdims))
        T._accumulate(x, _norm_backward(g * gain.data, y, inv))

    return T._make(data, (x, gain, bias), backward)


def _attention_weights_raw(
    s: np.ndarray, key_mask: np.ndarray | None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Forward of the masked key softmax; returns (weights, dead_rows).

    Padded keys get exactly zero weight.  Rows with no valid key fall back
    to a constant one-hot on the query's own position ("dead" rows, which
    also receive no gradient).
    """
    if key_mask is None:
        m = s.max(axis=-1, keepdims=True)
        e = np.exp(s - m)
        return e / e.sum(axis=-1, keepdims=True), None
    if key_mask.shape != (s.shape[0], s.shape[-1]):
        raise ShapeError(f"key_mask {key_mask.shape} does not match scores {s.shape}")
    valid = key_mask[:, None, None, :]
    shifted = np.where(valid, s, -np.inf)
    m = shifted.max(axis=-1, keepdims=True)
    dead = ~np.isfinite(m)
    e = np.exp(shifted - np.where(dead, 0.0, m))
    e = np.where(valid, e, 0.0)
    denom = e.sum(axis=-1, keepdims=True)
    weights = e / np.where(dead, 1.0, denom)
    if dead.any():
        own = np.eye(s.shape[-2], s.shape[-1], dtype=s.dtype)
        weights = np.where(dead, own, weights)
        return weights, dead
    return weights, None


def _softmax_backward(g: np.ndarray, w: np.ndarray, dead) -> np.ndarray:
    ds = w * (g - (g * w).sum(axis=-1, keepdims=True))
    if dead is not None:
        ds = np.where(dead, 0.0, ds)
    return ds


def attention_weights(scores: Tensor, key_mask: np.ndarray | None) -> Tensor:
    """Masked key softmax as a standalone op (scores [B, H, Tq, Tk],
    key_mask [B, Tk] boolean or None)."""
    weights, dead = _attention_weights_raw(scores.data, key_mask)

    def backward(g):
        T._accumulate(scores, _softmax_backward(g, weights, dead))

    return T._make(weights, (scores,), backward)


def multi_head_attention(
    q_in: Tensor,
    kv_in: Tensor,
    mask: np.ndarray | None,
    params: Mapping[str, Tensor],
    n_heads: int,
) -> Tensor:
    """Multi-head attention; ``mask`` marks valid key positions.

    Shapes: q_in [B, Tq, D], kv_in [B, Tk, D], mask [B, Tk] boolean or
    None.  Output matches q_in's shape.  Runs as one fused tape node.
    """
    if q_in.data.ndim != 3 or kv_in.data.ndim != 3:
        raise ShapeError(
            f"attention expects [B, T, D] inputs, got {q_in.shape} and {kv_in.shape}"
        )
    b, tq, d = q_in.shape
    tk = kv_in.shape[1]
    if kv_in.shape[2] != d:
        raise ShapeError(f"width mismatch: {q_in.shape} vs {kv_in.shape}")
    if d % n_heads:
        raise ShapeError(f"model width {d} not divisible by {n_heads} heads")
    dh = d // n_heads
    scale = 1.0 / np.sqrt(dh)

    wq, wk, wv, wo = (params[n].data for n in ("wq", "wk", "wv", "wo"))
    bq, bk, bv, bo = (params[n].data for n in ("bq", "bk", "bv", "bo"))

    q2 = q_in.data.reshape(-1, d)
    kv2 = kv_in.data.reshape(-1, d)

    def heads_view(x2, t):
        return x2.reshape(b, t, n_heads, dh).transpose(0, 2, 1, 3)

    q = heads_view(q2 @ wq + bq, tq)
    k = heads_view(kv2 @ wk + bk, tk)
    v = heads_view(kv2 @ wv + bv, tk)
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    weights, dead = _attention_weights_raw(scores, mask)
    mixed = weights @ v  # [B, H, Tq, dh]
    merged = mixed.transpose(0, 2, 1, 3).reshape(b, tq, d)
    data = (merged.reshape(-1, d) @ wo + bo).reshape(b, tq, d)

    def backward(g):
        g2 = g.reshape(-1, d)
        T._accumulate(params["bo"], g2.sum(axis=0))
        T._accumulate(params["wo"], merged.reshape(-1, d).T @ g2)
        g_merged = g2 @ wo.T
        g_mixed = g_merged.reshape(b, tq, n_heads, dh).transpose(0, 2, 1, 3)
        g_weights = g_mixed @ v.transpose(0, 1, 3, 2)
        g_v = weights.transpose(0, 1, 3, 2) @ g_mixed
        g_scores = _softmax_backward(g_weights, weights, dead) * scale
        g_q = g_scores @ k
        g_k = g_scores.transpose(0, 1, 3, 2) @ q

        def unheads(x4, t):
            return x4.transpose(0, 2, 1, 3).reshape(b, t, d).reshape(-1, d)

        gq2, gk2, gv2 = unheads(g_q, tq), unheads(g_k, tk), unheads(g_v, tk)
        T._accumulate(params["bq"], gq2.sum(axis=0))
        T._accumulate(params["bk"], gk2.sum(axis=0))
        T._accumulate(params["bv"], gv2.sum(axis=0))
        T._accumulate(params["wq"], q2.T @ gq2)
        T._accumulate(params["wk"], kv2.T @ gk2)
        T._accumulate(params["wv"], kv2.T @ gv2)
        T._accumulate(q_in, (gq2 @ wq.T).reshape(b, tq, d))
        T._accumulate(kv_in, (gk2 @ wk.T + gv2 @ wv.T).reshape(b, tk, d))

    parents = (
        q_in, kv_in,
        params["wq"], params["wk"], params["wv"], params["wo"],
        params["bq"], params["bk"], params["bv"], params["bo"],
    )
    return T._make(data, parents, backward)


def ffn(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    """relu MLP block (x @ w1 + b1 -> relu -> @ w2 + b2) as one tape node."""
    d_in = x.shape[-1]
    d_out = w2.shape[-1]
    x2 = x.data.reshape(-1, d_in)
    r = np.maximum(x2 @ w1.data + b1.data, 0)
    data = (r @ w2.data + b2.data).reshape(*x.shape[:-1], d_out)

    def backward(g):
        g2 = g.reshape(-1, d_out)
        T._accumulate(b2, g2.sum(axis=0))
        T._accumulate(w2, r.T @ g2)
        g_h = (g2 @ w2.data.T) * (r > 0)
        T._accumulate(b1, g_h.sum(axis=0))
        T._accumulate(w1, x2.T @ g_h)
        T._accumulate(x, (g_h @ w1.data.T).reshape(x.shape))

    return T._make(data, (x, w1, b1, w2, b2), backward)
