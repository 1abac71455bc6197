"""Scikit-learn style estimators over circuit datasets.

Each estimator owns an encoder plus one task head and follows the
fit/predict/transform conventions (get_params/set_params included), so the
models compose with standard tooling.  X is always a sequence of
DatasetRecord (or bare CircuitGraph for label-free estimators); labels
travel inside the records.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import heads, nn
from .dataset import DatasetRecord
from .encoder import EncoderConfig, encode_graph, graph_readout
from .graph import CircuitGraph, compute_levels
from .nn import ModelParams, Tensor
from .rewrite import random_equivalent
from .training import (
    BatchTooSmall,
    MissingLabels,
    derive_seed,
    encode_batch,
    run_epochs,
    single_thread_blas,
)


def as_graph(x) -> CircuitGraph:
    if isinstance(x, DatasetRecord):
        return x.circuit
    if isinstance(x, CircuitGraph):
        return x
    raise TypeError(f"expected DatasetRecord or CircuitGraph, got {type(x).__name__}")


def check_records(
    X: Sequence, require_channels: Sequence[str] = (), require_pairs: bool = False
) -> list[DatasetRecord]:
    """Validate estimator input: a non-empty sequence of records carrying
    the required label channels."""
    if len(X) == 0:
        raise ValueError("empty dataset")
    records = []
    for x in X:
        if not isinstance(x, DatasetRecord):
            raise TypeError(f"expected DatasetRecord, got {type(x).__name__}")
        for channel in require_channels:
            if x.labels is None or channel not in x.labels:
                raise MissingLabels(
                    f"record {x.id} lacks label channel {channel!r}"
                )
        if require_pairs and not x.sim_pairs:
            raise MissingLabels(f"record {x.id} lacks sim_pairs")
        records.append(x)
    return records


class _CircuitModel(BaseEstimator):
    """Shared encoder wiring for all task estimators."""

    _head_prefix: str = ""

    def __init__(
        self,
        d_model: int = 64,
        n_heads: int = 4,
        n_layers_per_step: int = 2,
        max_arity: int = 4,
        lr: float = 1e-3,
        epochs: int = 20,
        batch_size: int = 32,
        seed: int = 0,
    ):
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_layers_per_step = n_layers_per_step
        self.max_arity = max_arity
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def _config(self) -> EncoderConfig:
        return EncoderConfig(
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_layers_per_step=self.n_layers_per_step,
            max_arity=self.max_arity,
        )

    def _init_params(self) -> ModelParams:
        from .encoder import init_encoder_params

        params = init_encoder_params(self._config(), self.seed)
        if self._head_prefix:
            heads.HEAD_BUILDERS[self._head_prefix](params, self.d_model)
        params.hyper = {"estimator": type(self).__name__, **self.get_params()}
        return params

    def _encode_nodewise(self, graphs, head_fn) -> list[np.ndarray]:
        """Apply a per-node head over batches of circuits; returns one array
        per circuit, aligned with node ids."""
        config = self._config()
        out: list[np.ndarray] = []
        with single_thread_blas():
            for start in range(0, len(graphs), self.batch_size):
                chunk = graphs[start : start + self.batch_size]
                emb, union, offsets = encode_batch(chunk, self.params_, config)
                values = head_fn(emb.all_rows).data[emb.row_of]
                for g, off in zip(chunk, offsets):
                    out.append(values[off : off + g.n_nodes].astype(np.float64))
        return out

    def save(self, path: str | Path) -> None:
        self.params_.save(path)

    @classmethod
    def load(cls, path: str | Path):
        params = ModelParams.load(path)
        hyper = dict(params.hyper)
        name = hyper.pop("estimator", cls.__name__)
        klass = _ESTIMATOR_REGISTRY.get(name, cls)
        est = klass(**hyper)
        est.params_ = params
        return est


class FunctionShiftRegressor(_CircuitModel):
    """Predicts per-node shift (true minus independence-approximated
    probability) and reconstructs signal probabilities level by level."""

    _head_prefix = "shift."

    def fit(self, X: Sequence[DatasetRecord], y=None):
        records = check_records(X, require_channels=("shift",))
        self.params_ = self._init_params()
        config = self._config()

        def batch_loss(indices, epoch):
            graphs = [records[i].circuit for i in indices]
            emb, union, offsets = encode_batch(graphs, self.params_, config)
            preds = heads.shift_head(self.params_, emb.all_rows)
            by_node = preds[emb.row_of]
            target = np.concatenate(
                [np.asarray(records[i].labels["shift"], dtype=np.float32) for i in indices]
            )
            return nn.l1_loss(by_node, Tensor(target))

        result = run_epochs(
            len(records), self.batch_size, self.epochs, self.seed, self.lr,
            self.params_, batch_loss,
        )
        self.loss_curve_ = result.loss_curve
        return self

    def predict_shift(self, X) -> list[np.ndarray]:
        graphs = [as_graph(x) for x in X]
        return self._encode_nodewise(
            graphs, lambda rows: heads.shift_head(self.params_, rows)
        )

    def predict(self, X) -> list[np.ndarray]:
        """Reconstructed per-node signal probabilities (float64)."""
        graphs = [as_graph(x) for x in X]
        shifts = self.predict_shift(X)
        out = []
        clamps = 0
        for g, s in zip(graphs, shifts):
            y, c = heads.reconstruct_global(g, compute_levels(g), s)
            clamps += c
            out.append(y)
        self.last_clamp_activations_ = clamps
        return out


class SignalProbabilityRegressor(_CircuitModel):
    """Regresses each node's signal probability directly from its
    embedding; the no-reconstruction ablation baseline."""

    _head_prefix = "prob."

    def fit(self, X: Sequence[DatasetRecord], y=None):
        records = check_records(X, require_channels=("global_prob",))
        self.params_ = self._init_params()
        config = self._config()

        def batch_loss(indices, epoch):
            graphs = [records[i].circuit for i in indices]
            emb, union, offsets = encode_batch(graphs, self.params_, config)
            preds = heads.probability_head(self.params_, emb.all_rows)
            by_node = preds[emb.row_of]
            target = np.concatenate(
                [
                    np.asarray(records[i].labels["global_prob"], dtype=np.float32)
                    for i in indices
                ]
            )
            return nn.l1_loss(by_node, Tensor(target))

        result = run_epochs(
            len(records), self.batch_size, self.epochs, self.seed, self.lr,
            self.params_, batch_loss,
        )
        self.loss_curve_ = result.loss_curve
        return self

    def predict(self, X) -> list[np.ndarray]:
        graphs = [as_graph(x) for x in X]
        return self._encode_nodewise(
            graphs, lambda rows: heads.probability_head(self.params_, rows)
        )


class ContrastiveCircuitEmbedder(_CircuitModel, TransformerMixin):
    """Learns circuit-level embeddings where functionally equivalent
    rewrites land close together (in-batch negatives, cosine logits)."""

    def __init__(
        self,
        d_model: int = 64,
        n_heads: int = 4,
        n_layers_per_step: int = 2,
        max_arity: int = 4,
        lr: float = 1e-3,
        epochs: int = 10,
        batch_size: int = 16,
        seed: int = 0,
        temperature: float = 0.07,
        min_rewrites: int = 1,
        max_rewrites: int = 3,
    ):
        super().__init__(
            d_model=d_model,
            n_heads=n_heads,
            n_layers_per_step=n_layers_per_step,
            max_arity=max_arity,
            lr=lr,
            epochs=epochs,
            batch_size=batch_size,
            seed=seed,
        )
        self.temperature = temperature
        self.min_rewrites = min_rewrites
        self.max_rewrites = max_rewrites

    def _member_readouts(self, graphs, emb, offsets) -> list[Tensor]:
        outs = []
        for g, off in zip(graphs, offsets):
            rows = emb.row_of[np.asarray(g.primary_outputs) + off]
            mat = nn.embedding_lookup(emb.all_rows, rows)
            pooled = nn.mean(mat, axis=0)
            outs.append(
                nn.add(nn.matmul(pooled, self.params_["readout_w"]), self.params_["readout_b"])
            )
        return outs

    def fit(self, X: Sequence, y=None):
        if self.batch_size < 2:
            raise BatchTooSmall("contrastive training needs batch_size >= 2")
        graphs = [as_graph(x) for x in X]
        if len(graphs) < 2:
            raise BatchTooSmall("contrastive training needs at least 2 circuits")
        self.params_ = self._init_params()
        config = self._config()

        def batch_loss(indices, epoch):
            members = [graphs[i] for i in indices]
            positives = [
                random_equivalent(
                    graphs[i],
                    derive_seed(self.seed, 0xC0, epoch, i),
                    self.min_rewrites,
                    self.max_rewrites,
                )
                for i in indices
            ]
            emb_q, _, off_q = encode_batch(members, self.params_, config)
            emb_p, _, off_p = encode_batch(positives, self.params_, config)
            queries = self._member_readouts(members, emb_q, off_q)
            pos = self._member_readouts(positives, emb_p, off_p)
            losses = []
            for i, (q, p) in enumerate(zip(queries, pos)):
                negatives = [queries[j] for j in range(len(queries)) if j != i]
                if not negatives:
                    continue
                losses.append(nn.info_nce_loss(q, p, negatives, self.temperature))
            if not losses:
                return Tensor(np.float32(0.0))
            stacked = nn.concat([nn.reshape(l, (1,)) for l in losses], axis=0)
            return nn.mean(stacked)

        result = run_epochs(
            len(graphs), self.batch_size, self.epochs, self.seed, self.lr,
            self.params_, batch_loss,
        )
        self.loss_curve_ = result.loss_curve
        return self

    def transform(self, X) -> np.ndarray:
        """Circuit embeddings, one row per input circuit."""
        graphs = [as_graph(x) for x in X]
        config = self._config()
        rows = []
        with single_thread_blas():
            for start in range(0, len(graphs), self.batch_size):
                chunk = graphs[start : start + self.batch_size]
                emb, _, offsets = encode_batch(chunk, self.params_, config)
                for r in self._member_readouts(chunk, emb, offsets):
                    rows.append(r.data.astype(np.float64))
        return np.stack(rows)

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)


class NodeSimilarityRegressor(_CircuitModel):
    """Predicts truth-table similarity for node pairs from their
    embeddings."""

    _head_prefix = "sim."

    def fit(self, X: Sequence[DatasetRecord], y=None):
        records = check_records(X, require_pairs=True)
        self.params_ = self._init_params()
        config = self._config()

        def batch_loss(indices, epoch):
            graphs = [records[i].circuit for i in indices]
            emb, union, offsets = encode_batch(graphs, self.params_, config)
            lhs, rhs, target = [], [], []
            for i, off in zip(indices, offsets):
                for a, b, s in records[i].sim_pairs:
                    lhs.append(a + off)
                    rhs.append(b + off)
                    target.append(s)
            e_i = emb.matrix(np.asarray(lhs))
            e_j = emb.matrix(np.asarray(rhs))
            preds = heads.similarity_head(self.params_, e_i, e_j)
            return nn.l1_loss(preds, Tensor(np.asarray(target, dtype=np.float32)))

        result = run_epochs(
            len(records), self.batch_size, self.epochs, self.seed, self.lr,
            self.params_, batch_loss,
        )
        self.loss_curve_ = result.loss_curve
        return self

    def predict(self, X: Sequence[DatasetRecord]) -> list[np.ndarray]:
        """Per record: similarity predictions aligned with its sim_pairs."""
        records = check_records(X, require_pairs=True)
        config = self._config()
        out = []
        with single_thread_blas():
            for start in range(0, len(records), self.batch_size):
                chunk = records[start : start + self.batch_size]
                emb, union, offsets = encode_batch(
                    [r.circuit for r in chunk], self.params_, config
                )
                for r, off in zip(chunk, offsets):
                    lhs = np.asarray([a + off for a, b, s in r.sim_pairs])
                    rhs = np.asarray([b + off for a, b, s in r.sim_pairs])
                    preds = heads.similarity_head(
                        self.params_, emb.matrix(lhs), emb.matrix(rhs)
                    )
                    out.append(preds.data.astype(np.float64))
        return out


class TransitionRegressor(_CircuitModel):
    """Predicts per-node switching rates (P_0to1, P_1to0) for sequential
    circuits."""

    _head_prefix = "trans."

    def fit(self, X: Sequence[DatasetRecord], y=None):
        records = check_records(
            X, require_channels=("transition_p01", "transition_p10")
        )
        self.params_ = self._init_params()
        config = self._config()

        def batch_loss(indices, epoch):
            graphs = [records[i].circuit for i in indices]
            emb, union, offsets = encode_batch(graphs, self.params_, config)
            preds = heads.transition_head(self.params_, emb.all_rows)
            by_node = preds[emb.row_of]
            target = np.concatenate(
                [
                    np.stack(
                        [
                            np.asarray(records[i].labels["transition_p01"], dtype=np.float32),
                            np.asarray(records[i].labels["transition_p10"], dtype=np.float32),
                        ],
                        axis=1,
                    )
                    for i in indices
                ]
            )
            return nn.l1_loss(by_node, Tensor(target))

        result = run_epochs(
            len(records), self.batch_size, self.epochs, self.seed, self.lr,
            self.params_, batch_loss,
        )
        self.loss_curve_ = result.loss_curve
        return self

    def predict(self, X) -> list[np.ndarray]:
        """Per circuit: [n_nodes, 2] arrays of (P_0to1, P_1to0)."""
        graphs = [as_graph(x) for x in X]
        config = self._config()
        out = []
        with single_thread_blas():
            for start in range(0, len(graphs), self.batch_size):
                chunk = graphs[start : start + self.batch_size]
                emb, _, offsets = encode_batch(chunk, self.params_, config)
                values = heads.transition_head(self.params_, emb.all_rows).data[emb.row_of]
                for g, off in zip(chunk, offsets):
                    out.append(values[off : off + g.n_nodes].astype(np.float64))
        return out


_ESTIMATOR_REGISTRY = {
    cls.__name__: cls
    for cls in (
        FunctionShiftRegressor,
        SignalProbabilityRegressor,
        ContrastiveCircuitEmbedder,
        NodeSimilarityRegressor,
        TransitionRegressor,
    )
}
