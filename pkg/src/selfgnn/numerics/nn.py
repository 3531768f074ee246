"""Parameter initialisation and the two recurrent/attention building blocks."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigurationError
from . import ops
from .tensor import Tensor, as_tensor


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def normal_table(rng: np.random.Generator, rows: int, cols: int, std: float = 0.01) -> np.ndarray:
    return rng.normal(0.0, std, size=(rows, cols))


# ---------------------------------------------------------------------------
# GRU
# ---------------------------------------------------------------------------


def init_gru(rng: np.random.Generator, d_in: int, d_hidden: int) -> dict[str, np.ndarray]:
    """Gate blocks are laid out [update | reset | candidate] along the last axis."""
    w_x = np.concatenate([xavier_uniform(rng, d_in, d_hidden) for _ in range(3)], axis=1)
    w_h = np.concatenate([xavier_uniform(rng, d_hidden, d_hidden) for _ in range(3)], axis=1)
    return {"w_x": w_x, "w_h": w_h, "b": np.zeros(3 * d_hidden)}


def gru_cell(x, h_prev, params: dict) -> Tensor:
    """One GRU step.

    z = sigmoid(x W_z + h U_z + b_z)
    r = sigmoid(x W_r + h U_r + b_r)
    c = tanh(x W_c + (r * h) U_c + b_c)
    h' = (1 - z) * h + z * c
    """
    x, h_prev = as_tensor(x), as_tensor(h_prev)
    w_x, w_h, b = params["w_x"], params["w_h"], params["b"]
    d = w_h.shape[0]
    if w_x.shape[1] != 3 * d or w_h.shape[1] != 3 * d or b.shape != (3 * d,):
        raise ValueError("inconsistent GRU parameter shapes")
    if x.shape[-1] != w_x.shape[0]:
        raise ValueError(f"GRU input width {x.shape[-1]} != {w_x.shape[0]}")
    if h_prev.shape[-1] != d:
        raise ValueError(f"GRU hidden width {h_prev.shape[-1]} != {d}")

    gx = x @ w_x + b
    gh = h_prev @ w_h[:, : 2 * d]
    z = ops.sigmoid(gx[..., :d] + gh[..., :d])
    r = ops.sigmoid(gx[..., d : 2 * d] + gh[..., d:])
    cand = ops.tanh(gx[..., 2 * d :] + (r * h_prev) @ w_h[:, 2 * d :])
    return h_prev + z * (cand - h_prev)


def gru_sequence(inputs: list, params: dict, h0=None) -> list[Tensor]:
    """Run the cell over ``inputs`` (each ``(N, d_in)``); returns every hidden state."""
    d = params["w_h"].shape[0]
    h = h0 if h0 is not None else Tensor(np.zeros(inputs[0].shape[:-1] + (d,)))
    states = []
    for x in inputs:
        h = gru_cell(x, h, params)
        states.append(h)
    return states


# ---------------------------------------------------------------------------
# multi-head attention
# ---------------------------------------------------------------------------


def init_attention(rng: np.random.Generator, d: int) -> dict[str, np.ndarray]:
    out = {}
    for k in ("q", "k", "v", "o"):
        out[f"w{k}"] = xavier_uniform(rng, d, d)
        out[f"b{k}"] = np.zeros(d)
    return out


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    *lead, length, d = x.shape
    return ops.swapaxes(ops.reshape(x, (*lead, length, n_heads, d // n_heads)), -2, -3)


def _merge_heads(x: Tensor) -> Tensor:
    *lead, n_heads, length, dh = x.shape
    return ops.reshape(ops.swapaxes(x, -2, -3), (*lead, length, n_heads * dh))


def multi_head_attention(seq, params: dict, n_heads: int, mask=None, return_weights: bool = False):
    """Scaled dot-product self-attention over the second-to-last axis.

    ``seq`` has shape ``(..., length, d)``. ``mask`` (``(..., length)``, True =
    valid) removes positions as keys and zeroes their output rows.
    """
    seq = as_tensor(seq)
    d = seq.shape[-1]
    if n_heads < 1 or d % n_heads:
        raise ConfigurationError(f"embedding size {d} is not divisible by {n_heads} heads")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != seq.shape[:-1]:
            raise ValueError(f"mask shape {mask.shape} does not match sequence {seq.shape[:-1]}")

    q = _split_heads(seq @ params["wq"] + params["bq"], n_heads)
    k = _split_heads(seq @ params["wk"] + params["bk"], n_heads)
    v = _split_heads(seq @ params["wv"] + params["bv"], n_heads)
    logits = (q @ ops.swapaxes(k, -1, -2)) * (1.0 / math.sqrt(d // n_heads))
    key_mask = None if mask is None else mask[..., None, None, :]
    weights = ops.softmax(logits, mask=key_mask)
    out = _merge_heads(weights @ v) @ params["wo"] + params["bo"]
    if mask is not None:
        out = out * mask[..., None].astype(np.float64)
    if return_weights:
        return out, weights
    return out
