"""Minimal reverse-mode differentiable compute for the encoder and heads."""

from .tensor import (
    DEFAULT_DTYPE,
    ShapeError,
    Tensor,
    add,
    concat,
    div,
    embedding_lookup,
    layer_norm,
    log_softmax,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    sub,
    sum_,
    swapaxes,
    take,
    tanh,
)
from .layers import (
    attention_weights,
    ffn,
    layer_norm_affine,
    linear,
    multi_head_attention,
)
from .losses import cosine_similarity, info_nce_loss, l1_loss
from .optim import adam_step, init_adam_state
from .params import ModelParams, splitmix64, uniform_from_seed
from .gradcheck import grad_check

__all__ = [
    "DEFAULT_DTYPE",
    "ShapeError",
    "ffn",
    "Tensor",
    "add",
    "adam_step",
    "attention_weights",
    "concat",
    "cosine_similarity",
    "div",
    "embedding_lookup",
    "grad_check",
    "info_nce_loss",
    "init_adam_state",
    "l1_loss",
    "layer_norm",
    "layer_norm_affine",
    "linear",
    "log_softmax",
    "matmul",
    "mean",
    "ModelParams",
    "mul",
    "multi_head_attention",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "splitmix64",
    "sqrt",
    "sub",
    "sum_",
    "swapaxes",
    "take",
    "tanh",
    "uniform_from_seed",
]
