"""Parameter set and full forward pass of the recommender."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import HyperParams
from .encoder_long import aggregate_views, instance_sequence_encode, interval_sequence_encode
from .encoder_short import encode_period
from .numerics import ops
from .numerics.nn import init_attention, init_gru, normal_table, xavier_uniform
from .numerics.tensor import Tensor
from .streams import stream


def init_params(hp: HyperParams, n_users: int, n_items: int) -> dict[str, Tensor]:
    """Trainable tensors, keyed by dotted name.

    Embedding tables ~ N(0, embed_std), projections Xavier-uniform, biases 0.
    Tensors that an ablation variant never reads are not created.
    """
    rng = stream(hp.seed, "init")
    d = hp.d
    arrays: dict[str, np.ndarray] = {}
    for t in range(hp.effective_periods):
        arrays[f"short.user.{t}"] = normal_table(rng, n_users, d, hp.embed_std)
        arrays[f"short.item.{t}"] = normal_table(rng, n_items, d, hp.embed_std)
    if hp.propagate and hp.layer_combine == "concat_project":
        arrays["short.combine"] = xavier_uniform(rng, hp.layers * d, d)
    if hp.interval_fuse == "gru_attention":
        for side in ("user", "item"):
            for k, v in init_gru(rng, d, d).items():
                arrays[f"interval.gru_{side}.{k}"] = v
            for k, v in init_attention(rng, d).items():
                arrays[f"interval.att_{side}.{k}"] = v
    if hp.use_instance:
        arrays["instance.pos"] = normal_table(rng, hp.max_seq, d, hp.embed_std)
        for layer in range(hp.att_layers):
            for k, v in init_attention(rng, d).items():
                arrays[f"instance.att.{layer}.{k}"] = v
    if not hp.uniform_weight:
        arrays["sal.w1"] = xavier_uniform(rng, d, hp.d_sal)
        arrays["sal.b1"] = np.zeros(hp.d_sal)
        arrays["sal.w2"] = xavier_uniform(rng, hp.d_sal, 1)
        arrays["sal.b2"] = np.zeros(1)
    return {k: Tensor(v, requires_grad=True, name=k) for k, v in arrays.items()}


@dataclass
class Encoding:
    """Forward-pass products. ``final_user`` rows follow ``rows``."""

    short_user: list
    short_item: list
    long_user: Tensor
    long_item: Tensor
    inst_user: Tensor | None
    final_user: Tensor
    rows: np.ndarray


class SelfGNN:
    def __init__(self, hp: HyperParams, n_users: int, n_items: int, params: dict[str, Tensor] | None = None):
        self.hp = hp
        self.n_users = int(n_users)
        self.n_items = int(n_items)
        self.params = params if params is not None else init_params(hp, n_users, n_items)

    @classmethod
    def from_arrays(cls, hp: HyperParams, n_users: int, n_items: int, arrays: dict[str, np.ndarray]) -> "SelfGNN":
        expected = init_params(hp, n_users, n_items)
        if set(expected) != set(arrays):
            missing = sorted(set(expected) - set(arrays))
            extra = sorted(set(arrays) - set(expected))
            raise ValueError(f"parameter set mismatch; missing={missing} extra={extra}")
        params = {}
        for k in expected:
            a = np.asarray(arrays[k], dtype=np.float64)
            if a.shape != expected[k].shape:
                raise ValueError(f"{k}: shape {a.shape} != {expected[k].shape}")
            params[k] = Tensor(a, requires_grad=True, name=k)
        return cls(hp, n_users, n_items, params)

    def group(self, prefix: str) -> dict[str, Tensor]:
        """Sub-dict of parameters under ``prefix.``, keys stripped of it."""
        p = prefix + "."
        return {k[len(p) :]: v for k, v in self.params.items() if k.startswith(p)}

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.params.items()}

    def encode(
        self,
        graphs: list,
        seq_items: np.ndarray | None,
        seq_mask: np.ndarray | None,
        rows=None,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Encoding:
        hp = self.hp
        if len(graphs) != hp.effective_periods:
            raise ValueError(f"model expects {hp.effective_periods} interval graphs, got {len(graphs)}")
        rows = np.arange(self.n_users) if rows is None else np.asarray(rows, dtype=np.int64)

        short_user, short_item = [], []
        projection = self.params.get("short.combine")
        for t, g in enumerate(graphs):
            u_tab, i_tab = self.params[f"short.user.{t}"], self.params[f"short.item.{t}"]
            if hp.propagate:
                eu, ei = encode_period(
                    g, u_tab, i_tab, hp.layers, hp.dropout, rng, training, hp.slope,
                    hp.layer_combine, projection,
                )
            else:
                eu, ei = u_tab, i_tab
            short_user.append(eu)
            short_item.append(ei)

        interval = None
        if hp.interval_fuse == "gru_attention":
            interval = {
                "gru_user": self.group("interval.gru_user"),
                "gru_item": self.group("interval.gru_item"),
                "att_user": self.group("interval.att_user"),
                "att_item": self.group("interval.att_item"),
            }
        long_user, long_item = interval_sequence_encode(
            short_user, short_item, interval, hp.n_heads, hp.interval_fuse
        )

        base = ops.take_rows(long_user, rows)
        inst = None
        if hp.use_instance:
            layers = [self.group(f"instance.att.{k}") for k in range(hp.att_layers)]
            inst = instance_sequence_encode(
                seq_items[rows], seq_mask[rows], long_item, self.params["instance.pos"],
                layers, hp.n_heads, hp.slope,
            )
            final = aggregate_views(base, inst)
        else:
            final = base
        return Encoding(short_user, short_item, long_user, long_item, inst, final, rows)

    def score_matrix(self, enc: Encoding) -> np.ndarray:
        """Scores of every encoded user row against every item."""
        return enc.final_user.data @ enc.long_item.data.T
