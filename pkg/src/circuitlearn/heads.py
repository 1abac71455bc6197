"""Task heads applied to node / circuit embeddings.

Each head is a small MLP namespaced inside a ModelParams; builders are
idempotent for a given prefix, so one checkpoint can hold the encoder plus
any heads trained with it.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .nn import ModelParams, Tensor


def add_mlp_head(
    params: ModelParams, prefix: str, d_in: int, d_hidden: int, d_out: int
) -> None:
    """3-layer MLP: d_in -> d_hidden -> d_hidden -> d_out."""
    params.create(f"{prefix}w1", (d_in, d_hidden))
    params.create(f"{prefix}b1", (d_hidden,), fan_in=d_in)
    params.create(f"{prefix}w2", (d_hidden, d_hidden))
    params.create(f"{prefix}b2", (d_hidden,), fan_in=d_hidden)
    params.create(f"{prefix}w3", (d_hidden, d_out))
    params.create(f"{prefix}b3", (d_out,), fan_in=d_hidden)


def _mlp(params: ModelParams, prefix: str, x: Tensor) -> Tensor:
    h = nn.relu(nn.linear(x, params[f"{prefix}w1"], params[f"{prefix}b1"]))
    h = nn.relu(nn.linear(h, params[f"{prefix}w2"], params[f"{prefix}b2"]))
    return nn.linear(h, params[f"{prefix}w3"], params[f"{prefix}b3"])


def shift_head(params: ModelParams, x: Tensor, prefix: str = "shift.") -> Tensor:
    """Per-node shift prediction in [-1, 1] (tanh-bounded)."""
    out = nn.tanh(_mlp(params, prefix, x))
    return nn.reshape(out, (x.shape[0],))


def probability_head(params: ModelParams, x: Tensor, prefix: str = "prob.") -> Tensor:
    """Per-node probability prediction in (0, 1) (sigmoid-bounded)."""
    out = nn.sigmoid(_mlp(params, prefix, x))
    return nn.reshape(out, (x.shape[0],))


def similarity_head(
    params: ModelParams, e_i: Tensor, e_j: Tensor, prefix: str = "sim."
) -> Tensor:
    """Pairwise similarity in (0, 1) from [e_i || e_j || e_i*e_j].

    The concatenation is ordered, so S(i,j) and S(j,i) are *not*
    architecturally tied; symmetry is only as good as the training data.
    """
    feats = nn.concat([e_i, e_j, nn.mul(e_i, e_j)], axis=-1)
    out = nn.sigmoid(_mlp(params, prefix, feats))
    return nn.reshape(out, (feats.shape[0],)) if feats.data.ndim == 2 else out


def transition_head(params: ModelParams, x: Tensor, prefix: str = "trans.") -> Tensor:
    """Per-node (P_0to1, P_1to0) predictions in (0, 1); shape [n, 2]."""
    return nn.sigmoid(_mlp(params, prefix, x))


HEAD_BUILDERS = {
    "shift.": lambda p, d: add_mlp_head(p, "shift.", d, d, 1),
    "prob.": lambda p, d: add_mlp_head(p, "prob.", d, d, 1),
    "sim.": lambda p, d: add_mlp_head(p, "sim.", 3 * d, d, 1),
    "trans.": lambda p, d: add_mlp_head(p, "trans.", d, d, 2),
}


def reconstruct_global(graph, schedule, shifts: np.ndarray) -> tuple[np.ndarray, int]:
    """Level-by-level probability reconstruction in float64.

    Level-0 nodes take their exact values (PI parameter, latch initial
    state, 0 for constants).  Every deeper node adds its predicted shift to
    the independence approximation computed from the *estimates* of its
    inputs, then clamps to [0, 1]; the number of clamp activations is
    returned alongside.
    """
    from .graph import OperatorKind
    from .sim import local_function

    y = np.zeros(graph.n_nodes, dtype=np.float64)
    for v in schedule.levels[0]:
        kind = graph.kinds[v]
        if kind is OperatorKind.PI:
            y[v] = graph.pi_params[v]
        elif kind is OperatorKind.PSEUDO_PI:
            y[v] = float(graph.latch_init.get(v, 0))
    clamps = 0
    for level in schedule.levels[1:]:
        for v in level:
            local = local_function(
                graph.kinds[v], [y[u] for u in graph.inputs_of[v]]
            )
            raw = float(shifts[v]) + local
            if raw < 0.0 or raw > 1.0:
                clamps += 1
                raw = min(max(raw, 0.0), 1.0)
            y[v] = raw
    return y, clamps
