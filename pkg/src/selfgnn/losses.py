"""Scores, the recommendation hinge loss and the personalized self-augmented
(SAL) denoising loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ops
from .numerics.tensor import Tensor, as_tensor, stop_gradient


def predict_score(user_emb, item_emb) -> Tensor:
    """Row-wise dot product; works for single vectors or aligned batches."""
    return ops.sum(as_tensor(user_emb) * item_emb, axis=-1)


def rec_loss(pos_scores, neg_scores) -> Tensor:
    """Sum of max(0, 1 - pos + neg) over aligned (positive, negative) pairs."""
    pos_scores, neg_scores = as_tensor(pos_scores), as_tensor(neg_scores)
    if pos_scores.shape != neg_scores.shape:
        raise ValueError(f"positive/negative score shapes differ: {pos_scores.shape} vs {neg_scores.shape}")
    return ops.sum(ops.relu(1.0 - pos_scores + neg_scores))


def likelihood_scores(user_emb, item_emb, slope: float = 0.1) -> Tensor:
    """sum_k LeakyReLU(u_k * v_k) along the last axis."""
    return ops.sum(ops.leaky_relu(as_tensor(user_emb) * item_emb, slope), axis=-1)


def personalized_weight(long_user, short_user, params: dict, slope: float = 0.1) -> Tensor:
    """Reliability of the long-term profile as a denoising reference, in (0, 1).

    gamma = LeakyReLU((l + s + l*s) W1 + b1);  w = sigmoid(gamma W2 + b2)
    """
    long_user, short_user = as_tensor(long_user), as_tensor(short_user)
    mixed = long_user + short_user + long_user * short_user
    gamma = ops.leaky_relu(mixed @ params["w1"] + params["b1"], slope)
    w = ops.sigmoid(gamma @ params["w2"] + params["b2"])
    return ops.reshape(w, w.shape[:-1])


def sal_hinge(w_first, w_second, long_first, long_second, short_first, short_second) -> Tensor:
    """sum max(0, 1 - d1*d2), d1 = w s_bar - w' s_bar', d2 = s - s'."""
    d1 = w_first * long_first - w_second * long_second
    d2 = as_tensor(short_first) - short_second
    return ops.sum(ops.relu(1.0 - d1 * d2))


def sal_loss(
    pairs: list,
    short_user: list,
    short_item: list,
    long_user,
    long_item,
    sal_params: dict | None,
    slope: float = 0.1,
    stop_long_scores: bool = True,
    uniform_weight: bool = False,
) -> Tensor:
    """SAL loss summed over periods and sampled edge pairs.

    ``pairs[t]`` is an ``(n, 4)`` int array ``[u, v, u', v']`` for period t.
    Long-term likelihoods are wrapped in a stop-gradient (unless
    ``stop_long_scores`` is False), so the long-term embeddings only receive
    SAL gradient through the personalized weights. ``uniform_weight`` fixes
    every weight to exactly 1.
    """
    long_user_scores = stop_gradient(long_user) if stop_long_scores else long_user
    long_item_scores = stop_gradient(long_item) if stop_long_scores else long_item
    total = None
    for t, p in enumerate(pairs):
        p = np.asarray(p, dtype=np.int64)
        if p.shape[0] == 0:
            continue
        u, v, u2, v2 = p[:, 0], p[:, 1], p[:, 2], p[:, 3]
        su, sv = short_user[t], short_item[t]
        s_first = likelihood_scores(ops.take_rows(su, u), ops.take_rows(sv, v), slope)
        s_second = likelihood_scores(ops.take_rows(su, u2), ops.take_rows(sv, v2), slope)
        l_first = likelihood_scores(
            ops.take_rows(long_user_scores, u), ops.take_rows(long_item_scores, v), slope
        )
        l_second = likelihood_scores(
            ops.take_rows(long_user_scores, u2), ops.take_rows(long_item_scores, v2), slope
        )
        if uniform_weight:
            w_first = w_second = Tensor(np.ones(p.shape[0]))
        else:
            w_first = personalized_weight(
                ops.take_rows(long_user, u), ops.take_rows(su, u), sal_params, slope
            )
            w_second = personalized_weight(
                ops.take_rows(long_user, u2), ops.take_rows(su, u2), sal_params, slope
            )
        term = sal_hinge(w_first, w_second, l_first, l_second, s_first, s_second)
        total = term if total is None else total + term
    return total if total is not None else Tensor(0.0)


@dataclass
class LossBreakdown:
    l_rec: Tensor
    l_sal: Tensor
    l_reg: Tensor
    total: Tensor
    lambda1: float
    lambda2: float

    def values(self) -> dict[str, float]:
        return {
            "l_rec": self.l_rec.item(),
            "l_sal": self.l_sal.item(),
            "l_reg": self.l_reg.item(),
            "total": self.total.item(),
        }


def regularization(params) -> Tensor:
    """Sum of squared Frobenius norms over every tensor in ``params``."""
    tensors = list(params.values()) if isinstance(params, dict) else list(params)
    total = ops.square_sum(tensors[0])
    for p in tensors[1:]:
        total = total + ops.square_sum(p)
    return total


def total_loss(l_rec, l_sal, params, lambda1: float, lambda2: float) -> LossBreakdown:
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("loss weights must be non-negative")
    l_rec, l_sal = as_tensor(l_rec), as_tensor(l_sal)
    l_reg = regularization(params)
    total = l_rec + lambda1 * l_sal + lambda2 * l_reg
    return LossBreakdown(l_rec, l_sal, l_reg, total, float(lambda1), float(lambda2))
