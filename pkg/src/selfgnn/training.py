"""Training loop: per-batch forward/backward, Adam, learning-rate decay,
best-validation tracking and resumable checkpoints."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint
from .config import HyperParams
from .data import (
    InteractionIndex,
    SplitDataset,
    build_instance_sequences,
    pad_sequences,
    partition_intervals,
    sample_ssl_edge_pairs,
)
from .errors import DivergenceError
from .losses import LossBreakdown, predict_score, rec_loss, sal_loss, total_loss
from .metrics import candidate_ranks, summarize_ranks
from .model import SelfGNN
from .numerics import ops
from .numerics.optim import AdamState, adam_step
from .numerics.tensor import Tape, Tensor, backward
from .streams import stream

log = logging.getLogger(__name__)

RNG_SCHEME = "seedsequence-v1"


@dataclass
class TrainingContext:
    """Everything derived from a split that the model consumes."""

    split: SplitDataset
    hp: HyperParams
    graphs: list
    seq_items: np.ndarray
    seq_mask: np.ndarray
    index: InteractionIndex
    trainable_users: np.ndarray

    @property
    def n_users(self) -> int:
        return self.split.n_users

    @property
    def n_items(self) -> int:
        return self.split.n_items


def prepare(split: SplitDataset, hp: HyperParams, graphs=None, sequences=None) -> TrainingContext:
    train = split.train
    if graphs is None:
        graphs = partition_intervals(train, hp.effective_periods)
    if len(graphs) != hp.effective_periods:
        raise ValueError(f"got {len(graphs)} interval graphs for T={hp.effective_periods}")
    if sequences is None:
        sequences = build_instance_sequences(train, hp.max_seq)
    seq_items, seq_mask = pad_sequences(sequences, hp.max_seq)
    counts = train.user_counts()
    return TrainingContext(
        split, hp, graphs, seq_items, seq_mask, InteractionIndex(train), np.flatnonzero(counts > 0)
    )


def learning_rate(hp: HyperParams, epoch: int) -> float:
    return hp.lr * hp.lr_decay**epoch


def sample_rec_pairs(ctx: TrainingContext, batch_users: np.ndarray, n_pr: int, rng) -> tuple:
    pos = np.empty((batch_users.size, n_pr), dtype=np.int64)
    neg = np.empty((batch_users.size, n_pr), dtype=np.int64)
    for k, u in enumerate(batch_users.tolist()):
        pos[k] = ctx.index.sample_positives(u, n_pr, rng)
        neg[k] = ctx.index.sample_negatives(u, n_pr, rng)
    return pos, neg


def batch_loss(
    model: SelfGNN,
    ctx: TrainingContext,
    batch_users,
    epoch: int,
    batch: int,
    training: bool = True,
    force_sal: bool = False,
    stop_long_scores: bool = True,
) -> LossBreakdown:
    """Loss of one mini-batch; call inside an active :class:`Tape` for gradients.

    Randomness comes from streams keyed by (seed, epoch, batch), so the same
    arguments always give the same value.
    """
    hp = model.hp
    batch_users = np.asarray(batch_users, dtype=np.int64)
    enc = model.encode(
        ctx.graphs, ctx.seq_items, ctx.seq_mask, rows=batch_users, training=training,
        rng=stream(hp.seed, "dropout", epoch, batch),
    )

    pos, neg = sample_rec_pairs(ctx, batch_users, hp.n_pr, stream(hp.seed, "rec", epoch, batch))
    user_rows = np.repeat(np.arange(batch_users.size), hp.n_pr)
    users = ops.take_rows(enc.final_user, user_rows)
    pos_scores = predict_score(users, ops.take_rows(enc.long_item, pos.ravel()))
    neg_scores = predict_score(users, ops.take_rows(enc.long_item, neg.ravel()))
    l_rec = rec_loss(pos_scores, neg_scores)

    lambda1 = hp.effective_lambda1
    if lambda1 > 0.0 or force_sal:
        pairs = sample_ssl_edge_pairs(
            ctx.graphs, batch_users, hp.n_sal, stream(hp.seed, "ssl", epoch, batch), hp.ssl_sampling_scope
        )
        sal_params = None if hp.uniform_weight else model.group("sal")
        l_sal = sal_loss(
            pairs, enc.short_user, enc.short_item, enc.long_user, enc.long_item, sal_params,
            hp.slope, stop_long_scores=stop_long_scores, uniform_weight=hp.uniform_weight,
        )
    else:
        l_sal = Tensor(0.0)
    return total_loss(l_rec, l_sal, model.params, lambda1, hp.lambda2)


def evaluate_model(model: SelfGNN, ctx: TrainingContext, which: str = "validation", n_list=(10, 20)) -> dict:
    """HR/NDCG of the held-out ``which`` items for the split's test users."""
    split = ctx.split
    users = split.test_users
    if users.size == 0:
        return summarize_ranks([], n_list)
    held = (split.validation if which == "validation" else split.test).as_dict()
    enc = model.encode(ctx.graphs, ctx.seq_items, ctx.seq_mask, rows=users, training=False)
    ranks = candidate_ranks(
        enc.final_user.data,
        enc.long_item.data,
        [held[u] for u in users.tolist()],
        [split.negatives[u] for u in users.tolist()],
    )
    return summarize_ranks(ranks, n_list)


@dataclass
class EpochRecord:
    epoch: int
    l_rec: float
    l_sal: float
    l_reg: float
    total: float
    lr: float
    val_hr10: float
    val_ndcg10: float

    COLUMNS = ("epoch", "l_rec", "l_sal", "l_reg", "total", "lr", "val_hr10", "val_ndcg10")

    def row(self) -> list:
        return [getattr(self, c) for c in self.COLUMNS]


@dataclass
class TrainResult:
    best: Checkpoint
    last: Checkpoint
    history: list[EpochRecord] = field(default_factory=list)

    def model(self, which: str = "best") -> SelfGNN:
        return model_from_checkpoint(self.best if which == "best" else self.last)


def model_from_checkpoint(ckpt: Checkpoint, use_best: bool = False) -> SelfGNN:
    params = ckpt.best_params if use_best and ckpt.best_params is not None else ckpt.params
    return SelfGNN.from_arrays(ckpt.hp, ckpt.n_users, ckpt.n_items, params)


def _snapshot(model: SelfGNN) -> dict[str, np.ndarray]:
    return {k: v.data.copy() for k, v in model.params.items()}


def train(
    split: SplitDataset,
    graphs=None,
    sequences=None,
    hp: HyperParams | None = None,
    *,
    resume: Checkpoint | None = None,
    epochs: int | None = None,
    force_sal: bool = False,
    on_epoch=None,
    on_step=None,
) -> TrainResult:
    """Run (or continue) training and return best and last checkpoints.

    ``epochs`` overrides ``hp.epochs`` (the total epoch budget, counted from
    the start of the run). ``on_step(epoch, batch, model, breakdown)`` is
    called after every optimizer step.
    """
    if resume is not None:
        hp = resume.hp
    if hp is None:
        raise ValueError("hyperparameters are required")
    if epochs is not None:
        hp = hp.replace(epochs=int(epochs))
    ctx = prepare(split, hp, graphs, sequences)

    if resume is not None:
        model = SelfGNN.from_arrays(hp, resume.n_users, resume.n_items, resume.params)
        adam = AdamState(
            {k: v.copy() for k, v in resume.adam.m.items()},
            {k: v.copy() for k, v in resume.adam.v.items()},
            resume.adam.step, resume.adam.beta1, resume.adam.beta2, resume.adam.eps,
        )
        start = resume.epoch
        meta = dict(resume.meta)
        best_params = (
            {k: v.copy() for k, v in resume.best_params.items()} if resume.best_params else _snapshot(model)
        )
    else:
        model = SelfGNN(hp, split.n_users, split.n_items)
        adam = AdamState.for_params(model.params)
        start = 0
        meta = {"best_hr10": -1.0, "best_epoch": -1, "bad_epochs": 0, "stopped": False}
        best_params = _snapshot(model)

    history: list[EpochRecord] = []
    names = list(model.params)
    leaves = [model.params[k] for k in names]
    for epoch in range(start, hp.epochs):
        if meta["stopped"]:
            break
        lr = learning_rate(hp, epoch)
        order = stream(hp.seed, "shuffle", epoch).permutation(ctx.trainable_users)
        sums = {"l_rec": 0.0, "l_sal": 0.0, "l_reg": 0.0, "total": 0.0}
        for b, lo in enumerate(range(0, order.size, hp.batch_size)):
            batch_users = order[lo : lo + hp.batch_size]
            tape = Tape()
            with tape:
                loss = batch_loss(model, ctx, batch_users, epoch, b, training=True, force_sal=force_sal)
            values = loss.values()
            if not all(math.isfinite(v) for v in values.values()):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}: {values}")
            grads = backward(tape, loss.total, leaves)
            adam_step(model.params, {k: grads[model.params[k]] for k in names}, adam, lr)
            for k in sums:
                sums[k] += values[k]
            if on_step is not None:
                on_step(epoch, b, model, loss)

        val = evaluate_model(model, ctx, "validation", (10,))
        record = EpochRecord(epoch, sums["l_rec"], sums["l_sal"], sums["l_reg"], sums["total"], lr,
                             val["hr10"], val["ndcg10"])
        history.append(record)
        log.info("epoch %d: %s", epoch, record)
        if val["hr10"] > meta["best_hr10"]:
            meta.update(best_hr10=val["hr10"], best_epoch=epoch, bad_epochs=0)
            best_params = _snapshot(model)
        else:
            meta["bad_epochs"] += 1
            if meta["bad_epochs"] >= hp.patience:
                meta["stopped"] = True
        if on_epoch is not None:
            on_epoch(record, model)

    done = max(start, history[-1].epoch + 1) if history else start
    rng_state = {"scheme": RNG_SCHEME, "seed": hp.seed, "next_epoch": done}
    last = Checkpoint(hp, split.n_users, split.n_items, _snapshot(model), adam, done, rng_state, dict(meta),
                      best_params)
    best = Checkpoint(hp, split.n_users, split.n_items, best_params, adam, done, rng_state, dict(meta))
    return TrainResult(best, last, history)
