"""Long-term encoders: interval-level GRU + attention over the per-period
embeddings, and residual self-attention over each user's item instances."""

from __future__ import annotations

import numpy as np

from .numerics import ops
from .numerics.nn import gru_sequence, multi_head_attention
from .numerics.tensor import Tensor


def encode_interval_sequence(periods: list, gru: dict, attention: dict, n_heads: int) -> Tensor:
    """GRU over the T period embeddings (each ``(N, d)``), self-attention over
    the hidden states, then a sum over periods. Returns ``(N, d)``."""
    states = gru_sequence(periods, gru)
    hidden = ops.stack(states, axis=1)
    attended = multi_head_attention(hidden, attention, n_heads)
    return ops.sum(attended, axis=1)


def interval_sequence_encode(
    short_user: list,
    short_item: list,
    params: dict | None,
    n_heads: int = 4,
    fuse: str = "gru_attention",
) -> tuple[Tensor, Tensor]:
    """Long-term user and item embeddings from their short-term sequences.

    ``params`` holds ``gru_user``, ``gru_item``, ``att_user``, ``att_item``.
    ``fuse="sum"`` replaces the GRU and attention with a plain sum over periods.
    """
    if not short_user or len(short_user) != len(short_item):
        raise ValueError("need one (user, item) embedding pair per period")
    if fuse == "sum":
        return ops.sum(ops.stack(short_user, 0), axis=0), ops.sum(ops.stack(short_item, 0), axis=0)
    if fuse != "gru_attention":
        raise ValueError(f"unknown interval fusion {fuse!r}")
    long_user = encode_interval_sequence(short_user, params["gru_user"], params["att_user"], n_heads)
    long_item = encode_interval_sequence(short_item, params["gru_item"], params["att_item"], n_heads)
    return long_user, long_item


def instance_sequence_encode(
    seq_items: np.ndarray,
    seq_mask: np.ndarray,
    item_long,
    positional,
    layers: list,
    n_heads: int = 4,
    slope: float = 0.1,
) -> Tensor:
    """Per-user sum of L_a residual self-attention layers over item instances.

    ``seq_items``/``seq_mask`` are left-padded ``(B, M)`` arrays. Padded slots
    start as zero vectors, are excluded as attention keys, receive zero
    attention output and are excluded from the final sum. A user with no
    valid slot gets the zero vector.
    """
    seq_items = np.asarray(seq_items, dtype=np.int64)
    seq_mask = np.asarray(seq_mask, dtype=bool)
    if seq_items.shape != seq_mask.shape:
        raise ValueError("sequence index and mask shapes differ")
    if seq_items.shape[1] != positional.shape[0]:
        raise ValueError(
            f"sequence length {seq_items.shape[1]} does not match positional table ({positional.shape[0]} rows)"
        )
    keep = seq_mask[..., None].astype(np.float64)
    x = (ops.take_rows(item_long, seq_items) + positional) * keep
    for att in layers:
        x = ops.leaky_relu(multi_head_attention(x, att, n_heads, mask=seq_mask), slope) + x
    return ops.sum(x * keep, axis=1)


def aggregate_views(long_user, inst_user) -> Tensor:
    if long_user.shape != inst_user.shape:
        raise ValueError(f"cannot aggregate views of shapes {long_user.shape} and {inst_user.shape}")
    return long_user + inst_user
