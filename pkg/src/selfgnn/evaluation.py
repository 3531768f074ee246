"""Evaluation protocol, robustness harnesses, ablations and the SAL
case-study statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .checkpoint import Checkpoint
from .config import VARIANTS, HyperParams
from .data import InteractionLog, SplitDataset, period_of
from .losses import likelihood_scores
from .metrics import candidate_ranks, summarize_ranks
from .model import SelfGNN
from .training import TrainingContext, model_from_checkpoint, prepare, train


@dataclass
class EvalReport:
    metrics: dict[str, float]
    variant: str = "full"
    noise_ratio: float = 0.0
    n_users: int = 0
    cohorts: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "noise_ratio": self.noise_ratio,
            "n_users": self.n_users,
            "metrics": dict(self.metrics),
            "cohorts": list(self.cohorts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _as_model(model_or_ckpt) -> SelfGNN:
    if isinstance(model_or_ckpt, SelfGNN):
        return model_or_ckpt
    if isinstance(model_or_ckpt, Checkpoint):
        return model_from_checkpoint(model_or_ckpt)
    raise TypeError(f"expected SelfGNN or Checkpoint, got {type(model_or_ckpt).__name__}")


def user_ranks(model_or_ckpt, split: SplitDataset, which: str = "test", ctx: TrainingContext | None = None):
    """Rank of each test user's held-out item among its negatives (inference mode)."""
    model = _as_model(model_or_ckpt)
    if (model.n_users, model.n_items) != (split.n_users, split.n_items):
        raise ValueError(
            f"model built for {model.n_users} users/{model.n_items} items, split has "
            f"{split.n_users}/{split.n_items}"
        )
    ctx = ctx or prepare(split, model.hp)
    users = split.test_users
    held = (split.test if which == "test" else split.validation).as_dict()
    enc = model.encode(ctx.graphs, ctx.seq_items, ctx.seq_mask, rows=users, training=False)
    ranks = candidate_ranks(
        enc.final_user.data, enc.long_item.data,
        [held[u] for u in users.tolist()], [split.negatives[u] for u in users.tolist()],
    )
    return users, ranks


def evaluate_protocol(
    model_or_ckpt,
    split: SplitDataset,
    n_list=(10, 20),
    which: str = "test",
    cohort_boundaries=None,
    noise_ratio: float = 0.0,
) -> EvalReport:
    model = _as_model(model_or_ckpt)
    users, ranks = user_ranks(model, split, which)
    report = EvalReport(summarize_ranks(ranks, n_list), model.hp.variant, float(noise_ratio), int(users.size))
    if cohort_boundaries is not None:
        labels = sparsity_cohorts(split, cohort_boundaries)
        for label in cohort_labels(cohort_boundaries):
            sel = np.array([labels[u] == label for u in users.tolist()], dtype=bool)
            entry = {"cohort": label, "n_users": int(sel.sum())}
            entry.update(summarize_ranks(ranks[sel], n_list))
            report.cohorts.append(entry)
    return report


# ---------------------------------------------------------------------------
# robustness
# ---------------------------------------------------------------------------


def inject_noise(train: InteractionLog, ratio: float, rng: np.random.Generator, return_mask: bool = False):
    """Replace the item of floor(ratio * |train|) random records with a
    different, uniformly drawn item; users and timestamps are kept."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"noise ratio must lie in [0, 1), got {ratio}")
    n = len(train)
    k = int(np.floor(ratio * n))
    mask = np.zeros(n, dtype=bool)
    items = train.items.copy()
    if k:
        if train.n_items < 2:
            raise ValueError("need at least two items to inject noise")
        chosen = rng.choice(n, size=k, replace=False)
        # uniform over the other n_items - 1 ids
        draw = rng.integers(0, train.n_items - 1, size=k)
        items[chosen] = draw + (draw >= train.items[chosen])
        mask[chosen] = True
    noisy = InteractionLog(
        train.users.copy(), items, train.timestamps.copy(), train.n_users, train.n_items,
        train.user_labels, train.item_labels,
    )
    return (noisy, mask) if return_mask else noisy


def with_train(split: SplitDataset, train_log: InteractionLog) -> SplitDataset:
    """Same held-out items and negatives, different training log."""
    return replace(split, train=train_log)


def cohort_labels(boundaries) -> list[str]:
    b = [int(x) for x in boundaries]
    labels = [f"0-{b[0]}"]
    labels += [f"{lo}-{hi}" for lo, hi in zip(b[:-1], b[1:])]
    labels.append(f"{b[-1]}+")
    return labels


def sparsity_cohorts(split: SplitDataset, boundaries) -> dict[int, str]:
    """Assign each test user to the half-open bucket of their training count."""
    b = np.asarray(boundaries, dtype=np.int64)
    if b.size == 0 or np.any(np.diff(b) <= 0):
        raise ValueError("cohort boundaries must be non-empty and strictly increasing")
    labels = cohort_labels(b)
    counts = split.train.user_counts()
    users = split.test_users
    bucket = np.searchsorted(b, counts[users], side="right")
    return {int(u): labels[int(k)] for u, k in zip(users, bucket)}


# ---------------------------------------------------------------------------
# ablations
# ---------------------------------------------------------------------------


def run_ablation(variant: str, split: SplitDataset, hp: HyperParams, n_list=(10, 20)) -> EvalReport:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    result = train(split, hp=hp.replace(variant=variant))
    return evaluate_protocol(result.best, split, n_list)


# ---------------------------------------------------------------------------
# SAL case study
# ---------------------------------------------------------------------------


def _cosine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    denom = na * nb
    return np.divide(np.sum(a * b, axis=-1), denom, out=np.zeros_like(denom), where=denom > 0)


def mean_peer_similarity(item_emb: np.ndarray, flagged, user_items: dict) -> float:
    """Mean cosine similarity between each flagged (user, item) and the other
    items in that user's sequence."""
    flagged = list(flagged)
    if not flagged:
        raise ValueError("no flagged items")
    sims = []
    for u, v in flagged:
        peers = [p for p in user_items[u] if p != v]
        if not peers:
            continue
        sims.append(_cosine(item_emb[v][None, :], item_emb[np.asarray(peers)]).mean())
    if not sims:
        raise ValueError("no flagged item has sequence peers")
    return float(np.mean(sims))


def _user_items(train: InteractionLog) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for u, v in zip(train.users.tolist(), train.items.tolist()):
        out.setdefault(u, []).append(v)
    return out


def long_item_embeddings(model_or_ckpt, split: SplitDataset) -> np.ndarray:
    model = _as_model(model_or_ckpt)
    ctx = prepare(split, model.hp)
    enc = model.encode(ctx.graphs, ctx.seq_items, ctx.seq_mask, rows=np.arange(0), training=False)
    return enc.long_item.data


def sal_case_statistics(with_sal, without_sal, split: SplitDataset, flagged) -> dict:
    """Mean cosine similarity of flagged items to their sequence peers under
    both models (long-term item embeddings)."""
    flagged = [(int(u), int(v)) for u, v in flagged]
    if not flagged:
        raise ValueError("no flagged items")
    peers = _user_items(split.train)
    return {
        "n_flagged": len(flagged),
        "with_sal": mean_peer_similarity(long_item_embeddings(with_sal, split), flagged, peers),
        "without_sal": mean_peer_similarity(long_item_embeddings(without_sal, split), flagged, peers),
    }


def edge_short_term_likelihood(model_or_ckpt, split: SplitDataset, users, items, timestamps) -> np.ndarray:
    """Short-term likelihood of each (user, item) edge in the period holding
    its timestamp, computed in inference mode."""
    model = _as_model(model_or_ckpt)
    ctx = prepare(split, model.hp)
    enc = model.encode(ctx.graphs, ctx.seq_items, ctx.seq_mask, rows=np.arange(0), training=False)
    train = split.train
    periods = period_of(timestamps, train.timestamps.min(), train.timestamps.max(), len(ctx.graphs))
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    out = np.empty(users.size)
    for t in np.unique(periods).tolist():
        sel = periods == t
        su = enc.short_user[t].data[users[sel]]
        sv = enc.short_item[t].data[items[sel]]
        out[sel] = likelihood_scores(su, sv, model.hp.slope).data
    return out
