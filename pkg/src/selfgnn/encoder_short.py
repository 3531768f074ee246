"""Per-period collaborative encoding over interval graphs."""

from __future__ import annotations

import numpy as np

from .numerics import ops
from .numerics.sparse import SparseMatrix
from .numerics.tensor import Tensor


def drop_edges(adj: SparseMatrix, p: float, rng: np.random.Generator) -> SparseMatrix:
    """Inverted edge dropout: keep each entry with prob 1-p, rescale by 1/(1-p)."""
    if p <= 0.0 or adj.nnz == 0:
        return adj
    if p >= 1.0:
        raise ValueError("edge dropout must be < 1")
    keep = rng.random(adj.nnz) >= p
    return adj.mask_entries(keep, 1.0 / (1.0 - p))


def propagate_layer(
    graph,
    user_emb,
    item_emb,
    edge_dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = True,
    slope: float = 0.1,
) -> tuple[Tensor, Tensor]:
    """z_user = LeakyReLU(A @ item_emb), z_item = LeakyReLU(A.T @ user_emb).

    No degree normalisation is applied. In training mode with a positive
    ``edge_dropout`` a fresh dropped copy of A is used for both directions.
    """
    adj = graph.adjacency if hasattr(graph, "adjacency") else graph
    if user_emb.shape[0] != adj.shape[0] or item_emb.shape[0] != adj.shape[1]:
        raise ValueError(
            f"embedding rows ({user_emb.shape[0]}, {item_emb.shape[0]}) do not match graph {adj.shape}"
        )
    if training and edge_dropout > 0.0:
        if rng is None:
            raise ValueError("edge dropout in training mode needs an rng")
        adj = drop_edges(adj, edge_dropout, rng)
    z_user = ops.leaky_relu(ops.spmm(adj, item_emb), slope)
    z_item = ops.leaky_relu(ops.spmm(adj.T, user_emb), slope)
    return z_user, z_item


def encode_period(
    graph,
    user_table,
    item_table,
    layers: int,
    edge_dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = True,
    slope: float = 0.1,
    combine: str = "mean",
    projection=None,
) -> tuple[Tensor, Tensor]:
    """Residual layer stack e_l = z_l + e_{l-1} starting from the period's tables.

    The per-layer outputs e_1..e_L are averaged (``combine="mean"``) or
    concatenated and projected back to width d (``combine="concat_project"``).
    """
    if layers < 1:
        raise ValueError("need at least one propagation layer")
    e_user, e_item = user_table, item_table
    outs_user, outs_item = [], []
    for _ in range(layers):
        z_user, z_item = propagate_layer(graph, e_user, e_item, edge_dropout, rng, training, slope)
        e_user = z_user + e_user
        e_item = z_item + e_item
        outs_user.append(e_user)
        outs_item.append(e_item)
    if combine == "mean":
        if layers == 1:
            return outs_user[0], outs_item[0]
        scale = 1.0 / layers
        return _sum_all(outs_user) * scale, _sum_all(outs_item) * scale
    if combine == "concat_project":
        if projection is None:
            raise ValueError("concat_project needs a projection matrix")
        return ops.concat(outs_user, -1) @ projection, ops.concat(outs_item, -1) @ projection
    raise ValueError(f"unknown layer combination {combine!r}")


def _sum_all(parts):
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total
