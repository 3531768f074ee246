"""Reverse-mode differentiation over an explicit operation tape.

A :class:`Tape` is activated as a context manager. While active, every op
whose inputs include a tensor with ``requires_grad`` appends a node
``(output, inputs, backward_fn)``. Nodes are appended in execution order, so
the tape is topologically sorted by construction and :func:`backward` is a
single reverse sweep.

Outside an active tape ops run as plain numpy (inference mode).
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

_ACTIVE: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "requires_grad", "name", "_tape", "_index", "__weakref__")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._tape = None
        self._index = -1

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def is_leaf(self) -> bool:
        return self._tape is None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of differentiable operations."""

    def __init__(self, record_kinks: bool = False):
        self.nodes: list[tuple[Tensor, tuple, Callable]] = []
        self.stopped: list[Tensor] = []
        self.record_kinks = record_kinks
        self.kinks: list[np.ndarray] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _ACTIVE.pop()
        assert popped is self, "tapes must be exited in LIFO order"

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, out: Tensor, inputs: tuple, backward_fn: Callable) -> None:
        out._tape = self
        out._index = len(self.nodes)
        self.nodes.append((out, inputs, backward_fn))

    def note_kink(self, values: np.ndarray) -> None:
        if self.record_kinks:
            self.kinks.append(np.asarray(values).ravel().copy())

    def kink_signature(self) -> np.ndarray:
        """Sign pattern of every piecewise op input seen on this tape."""
        if not self.kinks:
            return np.zeros(0, dtype=np.int8)
        return np.concatenate([np.sign(k).astype(np.int8) for k in self.kinks])


def current_tape() -> Tape | None:
    return _ACTIVE[-1] if _ACTIVE else None


def make_result(data, inputs: Sequence, backward_fn: Callable) -> Tensor:
    """Wrap ``data`` as the output of an op; record it when gradients are needed."""
    tape = current_tape()
    needs = tape is not None and any(isinstance(x, Tensor) and x.requires_grad for x in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs:
        tape.record(out, tuple(inputs), backward_fn)
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def stop_gradient(x: Tensor) -> Tensor:
    """Same values, no gradient path back to ``x``."""
    x = as_tensor(x)
    out = Tensor(x.data, requires_grad=False, name=x.name)
    tape = current_tape()
    if tape is not None:
        tape.stopped.append(out)
    return out


def backward(tape: Tape, loss: Tensor, leaves: Iterable[Tensor] | None = None) -> dict:
    """Gradients of scalar ``loss`` for every leaf reached from it.

    Returns a dict keyed by leaf tensor. Leaves passed explicitly in ``leaves``
    always appear, with an all-zero gradient when no path reaches them (for
    example when the only path crosses a :func:`stop_gradient`).
    """
    if not isinstance(loss, Tensor) or loss._tape is not tape:
        raise ValueError("loss is not recorded on this tape")
    if loss.size != 1:
        raise ValueError(f"loss must be a scalar, got shape {loss.shape}")

    grads: list = [None] * len(tape.nodes)
    leaf_grads: dict[int, list] = {}
    grads[loss._index] = np.ones_like(loss.data)
    for k in range(loss._index, -1, -1):
        g = grads[k]
        if g is None:
            continue
        grads[k] = None
        _, inputs, fn = tape.nodes[k]
        for x, gx in zip(inputs, fn(g)):
            if gx is None or not isinstance(x, Tensor) or not x.requires_grad:
                continue
            if x._tape is tape:
                i = x._index
                grads[i] = gx if grads[i] is None else grads[i] + gx
            else:
                slot = leaf_grads.get(id(x))
                if slot is None:
                    leaf_grads[id(x)] = [x, gx]
                else:
                    slot[1] = slot[1] + gx

    out = {x: np.asarray(gx, dtype=np.float64).reshape(x.shape) for x, gx in leaf_grads.values()}
    if leaves is not None:
        for x in leaves:
            if x not in out:
                out[x] = np.zeros_like(x.data)
    return out
