"""Level-wise transformer encoder over circuit graphs.

Each node is updated from the ordered token sequence
[operator, input_1, ..., input_k] by a shared transformer step with
learned positional encodings; processing follows the logic-level schedule
so every input embedding is final before it is consumed.  Within a level,
nodes are batched by actual fan-in (ragged batching), which avoids padding
entirely on the hot path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .graph import CircuitGraph, LevelSchedule, OperatorKind
from .nn import ModelParams, Tensor

KIND_INDEX = {
    OperatorKind.PI: 0,
    OperatorKind.PSEUDO_PI: 1,
    OperatorKind.AND2: 2,
    OperatorKind.NOT: 3,
    OperatorKind.MUX: 4,
    OperatorKind.CONST0: 5,
}


_FFN_MULT = 2  # feed-forward hidden width, in units of d_model


class ScheduleError(RuntimeError):
    """A node's inputs were consumed before being computed."""


class NoOutputs(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    d_model: int = 64
    n_heads: int = 4
    n_layers_per_step: int = 2
    max_arity: int = 4  # sequence length: 1 operator token + max fan-in
    pe_kind: str = "learned"
    share_weights_across_levels: bool = True

    def __post_init__(self):
        if self.max_arity < 1 + max(k.arity for k in OperatorKind):
            raise ValueError(
                f"max_arity {self.max_arity} below operator vocabulary bound"
            )
        if self.d_model % self.n_heads:
            raise ValueError("n_heads must divide d_model")
        if self.pe_kind != "learned":
            raise ValueError(f"unsupported positional encoding {self.pe_kind!r}")


def init_encoder_params(
    config: EncoderConfig, seed: int, n_level_stacks: int = 1
) -> ModelParams:
    """Create all encoder parameters deterministically from ``seed``.

    With shared weights (the default) there is a single transformer stack;
    otherwise ``n_level_stacks`` stacks are created and level l uses stack
    min(l-1, n_level_stacks-1).
    """
    if config.share_weights_across_levels:
        n_level_stacks = 1
    d = config.d_model
    p = ModelParams(seed, hyper={"d_model": d, "n_heads": config.n_heads})
    p.create("type_table", (len(KIND_INDEX), d), fan_in=d)
    p.create("pos_table", (config.max_arity, d), fan_in=d)
    p.create("pi_w1", (1, d))
    p.create("pi_b1", (d,), fan_in=1)
    p.create("pi_w2", (d, d))
    p.create("pi_b2", (d,), fan_in=d)
    for s in range(n_level_stacks):
        for l in range(config.n_layers_per_step):
            base = f"s{s}.l{l}."
            for name in ("wq", "wk", "wv", "wo"):
                p.create(base + name, (d, d))
            for name in ("bq", "bk", "bv", "bo"):
                p.create(base + name, (d,), fan_in=d)
            p.create(base + "ln1_g", (d,), fan_in=1)
            p.create(base + "ln1_b", (d,), fan_in=1)
            p.create(base + "ln2_g", (d,), fan_in=1)
            p.create(base + "ln2_b", (d,), fan_in=1)
            p.create(base + "ffn_w1", (d, _FFN_MULT * d))
            p.create(base + "ffn_b1", (_FFN_MULT * d,), fan_in=d)
            p.create(base + "ffn_w2", (_FFN_MULT * d, d))
            p.create(base + "ffn_b2", (d,), fan_in=_FFN_MULT * d)
        p.create(f"s{s}.final_ln_g", (d,), fan_in=1)
        p.create(f"s{s}.final_ln_b", (d,), fan_in=1)
    p.create("readout_w", (d, d))
    p.create("readout_b", (d,), fan_in=d)
    return p


def _stack_index(params: ModelParams, config: EncoderConfig, level: int) -> int:
    if config.share_weights_across_levels:
        return 0
    s = 0
    while f"s{s + 1}.l0.wq" in params:
        s += 1
    return min(level - 1, s)


def _transformer_step(
    tokens: Tensor,
    mask: np.ndarray | None,
    params: ModelParams,
    config: EncoderConfig,
    stack: int = 0,
) -> Tensor:
    """Run the shared step on [B, T, D] token batches; returns the updated
    operator embeddings [B, D] (position 0 after the final norm)."""
    t = tokens.shape[1]
    x = nn.add(tokens, params["pos_table"][0:t])
    for l in range(config.n_layers_per_step):
        base = f"s{stack}.l{l}."
        h = nn.layer_norm_affine(x, params[base + "ln1_g"], params[base + "ln1_b"])
        attn = nn.multi_head_attention(
            h,
            h,
            mask,
            {k: params[base + k] for k in ("wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo")},
            config.n_heads,
        )
        x = nn.add(x, attn)
        h = nn.layer_norm_affine(x, params[base + "ln2_g"], params[base + "ln2_b"])
        ff = nn.ffn(h, params[base + "ffn_w1"], params[base + "ffn_b1"],
                    params[base + "ffn_w2"], params[base + "ffn_b2"])
        x = nn.add(x, ff)
    first = x[(slice(None), 0)]
    return nn.layer_norm_affine(
        first, params[f"s{stack}.final_ln_g"], params[f"s{stack}.final_ln_b"]
    )


@dataclass
class NodeEmbeddings:
    """Write-once per-node embeddings; row_of maps node id to its row in
    ``all_rows`` (-1 while not yet computed)."""

    all_rows: Tensor
    row_of: np.ndarray

    @property
    def d_model(self) -> int:
        return self.all_rows.shape[-1]

    def vector(self, v: int) -> Tensor:
        row = int(self.row_of[v])
        if row < 0:
            raise ScheduleError(f"node {v} not computed yet")
        return self.all_rows[row]

    def matrix(self, ids) -> Tensor:
        rows = self.row_of[np.asarray(ids)]
        if (rows < 0).any():
            missing = [int(i) for i, r in zip(np.asarray(ids).ravel(), rows.ravel()) if r < 0]
            raise ScheduleError(f"nodes {missing} not computed yet")
        return nn.embedding_lookup(self.all_rows, rows)

    def to_array(self) -> np.ndarray:
        """Per-node embedding matrix in node-id order."""
        return self.all_rows.data[self.row_of]


def init_level0(
    graph: CircuitGraph,
    schedule: LevelSchedule,
    params: ModelParams,
    config: EncoderConfig,
) -> NodeEmbeddings:
    """Embed level-0 nodes from their scalar input description plus a type
    embedding: PI uses its Bernoulli parameter, pseudo-PI its initial
    state, CONST0 zero."""
    level0 = schedule.levels[0]
    scalars = np.zeros((len(level0), 1), dtype=np.float32)
    type_idx = np.zeros(len(level0), dtype=np.int64)
    for i, v in enumerate(level0):
        kind = graph.kinds[v]
        type_idx[i] = KIND_INDEX[kind]
        if kind is OperatorKind.PI:
            scalars[i, 0] = graph.pi_params[v]
        elif kind is OperatorKind.PSEUDO_PI:
            scalars[i, 0] = graph.latch_init.get(v, 0)
        elif kind is not OperatorKind.CONST0:
            raise ScheduleError(f"node {v} ({kind.value}) at level 0")
    s = Tensor(scalars)
    h = nn.linear(nn.relu(nn.linear(s, params["pi_w1"], params["pi_b1"])),
                  params["pi_w2"], params["pi_b2"])
    emb0 = nn.add(h, nn.embedding_lookup(params["type_table"], type_idx))
    row_of = np.full(graph.n_nodes, -1, dtype=np.int64)
    for i, v in enumerate(level0):
        row_of[v] = i
    return NodeEmbeddings(all_rows=emb0, row_of=row_of)


def build_sequence(
    v: int,
    graph: CircuitGraph,
    embeddings: NodeEmbeddings,
    params: ModelParams,
    config: EncoderConfig,
) -> tuple[Tensor, np.ndarray]:
    """Padded token matrix [max_arity, d_model] plus validity mask for one
    node: type embedding first, then predecessor embeddings in stored
    fan-in order."""
    ins = graph.inputs_of[v]
    if len(ins) + 1 > config.max_arity:
        raise ValueError(f"node {v} fan-in exceeds max_arity {config.max_arity}")
    tok0 = nn.reshape(
        nn.embedding_lookup(params["type_table"], np.array([KIND_INDEX[graph.kinds[v]]])),
        (1, config.d_model),
    )
    parts = [tok0]
    if ins:
        parts.append(embeddings.matrix(np.asarray(ins)))
    n_pad = config.max_arity - 1 - len(ins)
    if n_pad:
        parts.append(Tensor(np.zeros((n_pad, config.d_model), dtype=np.float32)))
    tokens = nn.concat(parts, axis=0)
    mask = np.zeros(config.max_arity, dtype=bool)
    mask[: 1 + len(ins)] = True
    return tokens, mask


def encode_step(
    seq: Tensor,
    mask: np.ndarray | None,
    params: ModelParams,
    config: EncoderConfig,
    level: int = 1,
) -> Tensor:
    """Public single-sequence step: [T, d_model] in, [d_model] out."""
    tokens = nn.reshape(seq, (1, seq.shape[0], seq.shape[1]))
    m = None if mask is None else np.asarray(mask, dtype=bool)[None, :]
    out = _transformer_step(tokens, m, params, config, _stack_index(params, config, level))
    return out[0]


def encode_graph(
    graph: CircuitGraph,
    schedule: LevelSchedule,
    params: ModelParams,
    config: EncoderConfig,
) -> NodeEmbeddings:
    """Embed every node, level by level; deterministic and write-once.

    Within a level, nodes are grouped by fan-in and each group runs as one
    unpadded batch, which matches the one-node-at-a-time path exactly
    because padded positions receive zero attention anyway.
    """
    emb = init_level0(graph, schedule, params, config)
    all_rows = emb.all_rows
    row_of = emb.row_of
    n_done = len(schedule.levels[0])
    for level in range(1, schedule.max_level + 1):
        groups: dict[int, list[int]] = {}
        for v in schedule.levels[level]:
            groups.setdefault(len(graph.inputs_of[v]), []).append(v)
        stack = _stack_index(params, config, level)
        outs = []
        for k in sorted(groups):
            nodes = groups[k]
            idx = np.empty((len(nodes), k), dtype=np.int64)
            type_idx = np.empty(len(nodes), dtype=np.int64)
            for i, v in enumerate(nodes):
                if row_of[v] != -1:
                    raise ScheduleError(f"node {v} computed twice")
                type_idx[i] = KIND_INDEX[graph.kinds[v]]
                for j, u in enumerate(graph.inputs_of[v]):
                    if row_of[u] < 0:
                        raise ScheduleError(f"node {v} consumes uncomputed input {u}")
                    idx[i, j] = row_of[u]
            tok0 = nn.reshape(
                nn.embedding_lookup(params["type_table"], type_idx),
                (len(nodes), 1, config.d_model),
            )
            tokens = nn.concat([tok0, nn.embedding_lookup(all_rows, idx)], axis=1)
            outs.append(_transformer_step(tokens, None, params, config, stack))
            for v in nodes:
                row_of[v] = n_done
                n_done += 1
        all_rows = nn.concat([all_rows] + outs, axis=0)
    return NodeEmbeddings(all_rows=all_rows, row_of=row_of)


def graph_readout(
    graph: CircuitGraph, embeddings: NodeEmbeddings, params: ModelParams
) -> Tensor:
    """Circuit-level embedding: mean of primary-output embeddings through a
    linear projection."""
    if not graph.primary_outputs:
        raise NoOutputs("graph has no primary outputs")
    mat = embeddings.matrix(np.asarray(graph.primary_outputs))
    pooled = nn.mean(mat, axis=0)
    return nn.add(nn.matmul(pooled, params["readout_w"]), params["readout_b"])
