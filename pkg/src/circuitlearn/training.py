"""Shared training machinery: circuit batching, the epoch loop, and
reproducible seeds.  Estimators drive these; the CLI drives estimators."""

from __future__ import annotations

import random
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .encoder import EncoderConfig, NodeEmbeddings, encode_graph
from .graph import CircuitGraph, LevelSchedule, compute_levels
from .nn import ModelParams, Tensor, adam_step, init_adam_state


def single_thread_blas():
    """Pin BLAS to one thread: deterministic reductions, and faster on the
    small matrices this model produces."""
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=1, user_api="blas")
    except ImportError:  # pragma: no cover
        return nullcontext()


class NonFiniteLoss(RuntimeError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}")
        self.epoch = epoch


class MissingLabels(ValueError):
    pass


class BatchTooSmall(ValueError):
    pass


def disjoint_union(graphs: Sequence[CircuitGraph]) -> tuple[CircuitGraph, list[int]]:
    """Merge circuits into one graph with shifted node ids; returns the
    union and each member's id offset.  Levels are preserved, so encoding
    the union equals encoding members separately."""
    kinds: list = []
    inputs_of: list[tuple[int, ...]] = []
    outputs: list[int] = []
    pi_params: dict[int, float] = {}
    latch_map: dict[int, int] = {}
    latch_init: dict[int, int] = {}
    offsets: list[int] = []
    base = 0
    for g in graphs:
        offsets.append(base)
        kinds.extend(g.kinds)
        inputs_of.extend(tuple(u + base for u in ins) for ins in g.inputs_of)
        outputs.extend(o + base for o in g.primary_outputs)
        pi_params.update({v + base: p for v, p in g.pi_params.items()})
        latch_map.update({v + base: d + base for v, d in g.latch_map.items()})
        latch_init.update({v + base: s for v, s in g.latch_init.items()})
        base += g.n_nodes
    union = CircuitGraph.build(
        kinds=kinds,
        inputs_of=inputs_of,
        primary_outputs=outputs,
        pi_params=pi_params,
        latch_map=latch_map,
        latch_init=latch_init,
    )
    return union, offsets


def encode_batch(
    graphs: Sequence[CircuitGraph], params: ModelParams, config: EncoderConfig
) -> tuple[NodeEmbeddings, CircuitGraph, list[int]]:
    union, offsets = disjoint_union(graphs)
    emb = encode_graph(union, compute_levels(union), params, config)
    return emb, union, offsets


def derive_seed(master: int, *parts: int) -> int:
    """Stable sub-seed derivation for per-epoch / per-item randomness."""
    from .nn.params import splitmix64

    x = master & 0xFFFFFFFFFFFFFFFF
    for p in parts:
        x = int(splitmix64(x ^ (p & 0xFFFFFFFFFFFFFFFF), 1)[0])
    return x


@dataclass
class FitResult:
    loss_curve: list[float] = field(default_factory=list)
    clamp_activations: int = 0


def run_epochs(
    n_items: int,
    batch_size: int,
    epochs: int,
    seed: int,
    lr: float,
    params: ModelParams,
    batch_loss: Callable[[list[int], int], Tensor],
) -> FitResult:
    """Generic training loop: seeded shuffling, Adam, mean epoch loss.

    ``batch_loss(indices, epoch)`` returns the scalar loss tensor for one
    batch of dataset indices.  Raises NonFiniteLoss as soon as a batch
    produces a NaN/inf loss.
    """
    state = init_adam_state()
    result = FitResult()
    order = list(range(n_items))
    with single_thread_blas():
        for epoch in range(epochs):
            random.Random(derive_seed(seed, 0xE0, epoch)).shuffle(order)
            total = 0.0
            n_batches = 0
            for start in range(0, n_items, batch_size):
                batch = order[start : start + batch_size]
                params.zero_grad()
                loss = batch_loss(batch, epoch)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise NonFiniteLoss(epoch, value)
                loss.backward()
                grads = {
                    name: t.grad
                    for name, t in params.tensors.items()
                    if t.grad is not None
                }
                adam_step(params, grads, state, lr=lr)
                total += value
                n_batches += 1
            result.loss_curve.append(total / max(1, n_batches))
    return result
