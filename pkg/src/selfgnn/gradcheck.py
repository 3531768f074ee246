"""Central finite-difference checks of tape gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics.tensor import Tape, backward


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||), and 0 when both vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def numeric_gradient(f: Callable[[], float], array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``f`` w.r.t. every entry of ``array`` (perturbed in place, restored)."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    g = grad.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        up = f()
        flat[k] = old - h
        down = f()
        flat[k] = old
        g[k] = (up - down) / (2.0 * h)
    return grad


@dataclass
class GradCheckRow:
    name: str
    size: int
    checked: int
    rel_error: float
    max_abs_error: float
    passed: bool
    negligible: bool = False


def check_gradients(
    loss_fn: Callable[[], object],
    params: dict,
    h: float = 1e-5,
    tol: float = 1e-3,
    names=None,
    max_coords: int | None = None,
    atol: float = 1e-9,
    seed: int = 0,
) -> list[GradCheckRow]:
    """Compare tape gradients with central differences for each named tensor.

    ``loss_fn()`` must build a scalar Tensor loss using the current values of
    ``params`` (name -> Tensor) and be deterministic. Coordinates whose
    +/- h perturbation flips the sign of any piecewise-linear op input
    (LeakyReLU, hinge) are excluded: the derivative is not defined there.

    ``max_coords`` caps the coordinates checked per tensor (a seeded random
    subset). A tensor whose analytic and numeric gradients both have norm
    below ``atol`` passes: its relative error only compares rounding noise.
    """
    rng = np.random.default_rng(seed)
    base = Tape(record_kinks=True)
    with base:
        loss = loss_fn()
    grads = backward(base, loss, params.values())
    ref_sig = base.kink_signature()

    def evaluate() -> tuple[float, np.ndarray]:
        tape = Tape(record_kinks=True)
        with tape:
            value = loss_fn()
        return value.item(), tape.kink_signature()

    rows = []
    for name in names or list(params):
        p = params[name]
        flat = p.data.reshape(-1)
        analytic = grads[p].reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        analytic = analytic[coords]
        numeric = np.zeros(coords.size)
        keep = np.ones(coords.size, dtype=bool)
        for j, k in enumerate(coords.tolist()):
            old = flat[k]
            flat[k] = old + h
            up, sig_up = evaluate()
            flat[k] = old - h
            down, sig_down = evaluate()
            flat[k] = old
            if sig_up.shape != ref_sig.shape or np.any(sig_up != ref_sig) or np.any(sig_down != ref_sig):
                keep[j] = False
                continue
            numeric[j] = (up - down) / (2.0 * h)
        a, n = analytic[keep], numeric[keep]
        err = relative_error(a, n)
        max_abs = float(np.max(np.abs(a - n), initial=0.0))
        negligible = bool(max(np.linalg.norm(a), np.linalg.norm(n)) < atol)
        rows.append(GradCheckRow(name, flat.size, int(keep.sum()), err, max_abs, bool(err < tol) or negligible, negligible))
    return rows


def toy_problem(hp=None, seed: int = 0, stop_long_scores: bool = False):
    """A tiny, fully deterministic training loss for gradient checking.

    Six users and eight items, every user with six interactions (four left
    for training after the held-out pair). Returns ``(loss_fn, params)``.
    """
    from .config import HyperParams
    from .data import split_leave_two
    from .model import SelfGNN
    from .synthetic import clustered_log
    from .training import batch_loss, prepare

    if hp is None:
        hp = HyperParams(
            d=8, n_heads=2, layers=2, att_layers=2, n_periods=3, max_seq=4, d_sal=8,
            n_sal=8, lambda1=1.0, embed_std=0.1, seed=seed,
        )
    log = clustered_log(n_users=6, n_items=8, n_clusters=1, per_user=6, seed=seed)
    split = split_leave_two(log, seed=seed)
    ctx = prepare(split, hp)
    model = SelfGNN(hp, split.n_users, split.n_items)
    users = ctx.trainable_users

    def loss_fn():
        return batch_loss(model, ctx, users, epoch=0, batch=0, training=True, force_sal=True,
                          stop_long_scores=stop_long_scores).total

    return loss_fn, model.params


def group_of(name: str) -> str:
    """Parameter group: the dotted prefix up to the layer/period index."""
    head, _, rest = name.partition(".")
    if head == "short":
        return "short"
    if head == "interval":
        return "interval." + rest.split(".")[0]
    if head == "instance":
        return "instance.pos" if rest == "pos" else "instance.att"
    return head


def group_rows(rows: list[GradCheckRow]) -> list[dict]:
    groups: dict[str, dict] = {}
    for r in rows:
        g = groups.setdefault(group_of(r.name), {"group": group_of(r.name), "tensors": 0, "checked": 0,
                                                 "max_rel_error": 0.0, "passed": True})
        g["tensors"] += 1
        g["checked"] += r.checked
        if not r.negligible:
            g["max_rel_error"] = max(g["max_rel_error"], r.rel_error)
        g["passed"] = g["passed"] and r.passed
    return list(groups.values())


def format_table(rows: list[GradCheckRow]) -> str:
    lines = [f"{'tensor':<32} {'size':>6} {'checked':>8} {'rel_err':>10}  result"]
    for r in rows:
        lines.append(f"{r.name:<32} {r.size:>6} {r.checked:>8} {r.rel_error:>10.2e}  {'pass' if r.passed else 'FAIL'}"
                     + ("  (zero gradient)" if r.negligible else ""))
    return "\n".join(lines)
