"""Ranking metrics for single-positive candidate lists."""

from __future__ import annotations

import math

import numpy as np


def _check_n(n: int) -> None:
    if n < 1:
        raise ValueError(f"cutoff must be >= 1, got {n}")


def hr_at_n(rank: int, n: int) -> int:
    _check_n(n)
    if rank < 1:
        raise ValueError("rank is 1-based")
    return int(rank <= n)


def ndcg_at_n(rank: int, n: int) -> float:
    """1/log2(rank+1) inside the cutoff, else 0 (ideal DCG is 1)."""
    _check_n(n)
    if rank < 1:
        raise ValueError("rank is 1-based")
    return 1.0 / math.log2(rank + 1) if rank <= n else 0.0


def rank_of_positive(pos_score: float, pos_item: int, neg_scores, neg_items) -> int:
    """1-based rank under descending score, ties broken by ascending item id."""
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    neg_items = np.asarray(neg_items)
    ahead = (neg_scores > pos_score) | ((neg_scores == pos_score) & (neg_items < pos_item))
    return int(ahead.sum()) + 1


def candidate_ranks(user_rows: np.ndarray, item_table: np.ndarray, targets, negatives: list) -> np.ndarray:
    """Rank of each target among its own negatives.

    ``user_rows[k]`` scores against ``item_table`` rows ``targets[k]`` and
    ``negatives[k]``.
    """
    ranks = np.empty(len(targets), dtype=np.int64)
    for k, (pos, negs) in enumerate(zip(targets, negatives)):
        u = user_rows[k]
        negs = np.asarray(negs, dtype=np.int64)
        ranks[k] = rank_of_positive(float(item_table[pos] @ u), int(pos), item_table[negs] @ u, negs)
    return ranks


def summarize_ranks(ranks, n_list=(10, 20)) -> dict[str, float]:
    ranks = np.asarray(ranks, dtype=np.int64)
    out = {}
    for n in n_list:
        _check_n(n)
        if ranks.size == 0:
            out[f"hr{n}"] = 0.0
            out[f"ndcg{n}"] = 0.0
            continue
        hit = ranks <= n
        out[f"hr{n}"] = float(hit.mean())
        out[f"ndcg{n}"] = float(np.where(hit, 1.0 / np.log2(ranks + 1.0), 0.0).mean())
    return out
