"""Tensor arithmetic, reverse-mode gradients, sparse products and Adam."""

from . import ops
from .nn import gru_cell, gru_sequence, init_attention, init_gru, multi_head_attention
from .ops import leaky_relu, sigmoid, spmm, softmax, tanh
from .optim import AdamState, adam_step
from .sparse import SparseMatrix
from .tensor import Tape, Tensor, backward, current_tape, stop_gradient

__all__ = [
    "AdamState",
    "SparseMatrix",
    "Tape",
    "Tensor",
    "adam_step",
    "backward",
    "current_tape",
    "gru_cell",
    "gru_sequence",
    "init_attention",
    "init_gru",
    "leaky_relu",
    "multi_head_attention",
    "ops",
    "sigmoid",
    "softmax",
    "spmm",
    "stop_gradient",
    "tanh",
]
