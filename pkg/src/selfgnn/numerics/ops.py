"""Differentiable tensor operations.

Each op computes its value with numpy and hands :func:`make_result` a closure
mapping the upstream gradient to one gradient per input (``None`` for
non-differentiable inputs).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .._accel import kernels
from .sparse import SparseMatrix
from .tensor import Tensor, as_tensor, current_tape, make_result


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_finite(x: Tensor, op: str) -> None:
    if not np.all(np.isfinite(x.data)):
        raise FloatingPointError(f"{op}: non-finite input")


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(a.data * b.data, (a, b), grad)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(a.data / b.data, (a, b), grad)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_result(-a.data, (a,), lambda g: (-g,))


def square_sum(a) -> Tensor:
    """Squared Frobenius norm."""
    a = as_tensor(a)
    return make_result(np.sum(a.data * a.data), (a,), lambda g: (2.0 * g * a.data,))


# ---------------------------------------------------------------------------
# linear algebra and reshaping
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul expects operands with at least 2 dimensions")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def grad(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(a.data @ b.data, (a, b), grad)


def spmm(a: SparseMatrix, b) -> Tensor:
    """Sparse @ dense; the gradient w.r.t. ``b`` is ``a.T @ upstream``."""
    b = as_tensor(b)
    if b.ndim != 2:
        raise ValueError("spmm expects a dense matrix operand")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"spmm shape mismatch {a.shape} @ {b.shape}")
    return make_result(a.matmul(b.data), (b,), lambda g: (a.T.matmul(g),))


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    a = as_tensor(a)

    def grad(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), grad)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return make_result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def swapaxes(a, axis1: int, axis2: int) -> Tensor:
    a = as_tensor(a)
    return make_result(
        np.swapaxes(a.data, axis1, axis2), (a,), lambda g: (np.swapaxes(g, axis1, axis2),)
    )


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    advanced = isinstance(index, (list, np.ndarray)) or (
        isinstance(index, tuple) and any(isinstance(i, (list, np.ndarray)) for i in index)
    )

    def grad(g):
        out = np.zeros_like(a.data)
        if advanced:
            np.add.at(out, index, g)
        else:
            out[index] = g
        return (out,)

    return make_result(a.data[index], (a,), grad)


def take_rows(table, index) -> Tensor:
    """Gather rows of a 2-D table: ``out[...] = table[index[...]]``."""
    table = as_tensor(table)
    index = np.asarray(index, dtype=np.int64)
    if table.ndim != 2:
        raise ValueError("take_rows expects a 2-D table")
    n_rows, width = table.shape

    def grad(g):
        flat = np.ascontiguousarray(g.reshape(-1, width))
        return (kernels.scatter_add_rows(n_rows, np.ascontiguousarray(index.ravel()), flat),)

    return make_result(table.data[index], (table,), grad)


def concat(parts: Sequence, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]
    return make_result(
        np.concatenate([p.data for p in parts], axis=axis),
        parts,
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def stack(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]

    def grad(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))

    return make_result(np.stack([p.data for p in parts], axis=axis), parts, grad)


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------


def leaky_relu(x, slope: float = 0.1) -> Tensor:
    x = as_tensor(x)
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    _check_finite(x, "leaky_relu")
    tape = current_tape()
    if tape is not None:
        tape.note_kink(x.data)
    pos = x.data >= 0
    return make_result(
        np.where(pos, x.data, slope * x.data),
        (x,),
        lambda g: (np.where(pos, g, slope * g),),
    )


def relu(x) -> Tensor:
    """max(0, x), with subgradient 0 at the kink."""
    x = as_tensor(x)
    _check_finite(x, "relu")
    tape = current_tape()
    if tape is not None:
        tape.note_kink(x.data)
    pos = x.data > 0
    return make_result(np.where(pos, x.data, 0.0), (x,), lambda g: (np.where(pos, g, 0.0),))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    _check_finite(x, "sigmoid")
    s = _sigmoid(x.data)
    return make_result(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    return make_result(t, (x,), lambda g: (g * (1.0 - t * t),))


def softmax(x, mask=None, axis: int = -1) -> Tensor:
    """Softmax along ``axis``; entries where ``mask`` is False get probability 0.

    A slice with no unmasked entry yields all zeros instead of NaN.
    """
    x = as_tensor(x)
    logits = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), logits.shape)
        logits = np.where(mask, logits, -np.inf)
    peak = np.max(logits, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    e = np.exp(logits - peak)
    denom = np.sum(e, axis=axis, keepdims=True)
    p = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)

    def grad(g):
        return (p * (g - np.sum(g * p, axis=axis, keepdims=True)),)

    return make_result(p, (x,), grad)


# ---------------------------------------------------------------------------
# operator overloads
# ---------------------------------------------------------------------------

Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__truediv__ = lambda self, other: div(self, other)
Tensor.__rtruediv__ = lambda self, other: div(other, self)
Tensor.__neg__ = lambda self: neg(self)
Tensor.__matmul__ = lambda self, other: matmul(self, other)
Tensor.__rmatmul__ = lambda self, other: matmul(other, self)
Tensor.__getitem__ = lambda self, index: getitem(self, index)
Tensor.sum = lambda self, axis=None, keepdims=False: sum(self, axis=axis, keepdims=keepdims)
Tensor.reshape = lambda self, *shape: reshape(self, shape[0] if len(shape) == 1 else shape)
