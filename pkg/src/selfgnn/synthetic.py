"""Small synthetic interaction logs with known structure."""

from __future__ import annotations

import numpy as np

from .data import InteractionLog
from .streams import stream


def cluster_of(index, n_total: int, n_clusters: int) -> np.ndarray:
    """Contiguous block assignment of ids to clusters."""
    return (np.asarray(index) * n_clusters) // n_total


def clustered_log(
    n_users: int = 20,
    n_items: int = 30,
    n_clusters: int = 2,
    per_user: int = 12,
    horizon: int = 10_000,
    seed: int = 0,
) -> InteractionLog:
    """Every user interacts only with items of their own cluster.

    Each user draws ``per_user`` distinct in-cluster items at distinct random
    timestamps in ``[0, horizon)``.
    """
    rng = stream(seed, "synthetic")
    item_cluster = cluster_of(np.arange(n_items), n_items, n_clusters)
    users, items, stamps = [], [], []
    for u in range(n_users):
        c = int(cluster_of(u, n_users, n_clusters))
        pool = np.flatnonzero(item_cluster == c)
        if per_user > pool.size:
            raise ValueError(f"cluster {c} has only {pool.size} items, need {per_user}")
        chosen = rng.choice(pool, size=per_user, replace=False)
        ts = np.sort(rng.choice(horizon, size=per_user, replace=False))
        users.extend([u] * per_user)
        items.extend(chosen.tolist())
        stamps.extend(ts.tolist())
    return InteractionLog.from_arrays(
        users, items, stamps, n_users, n_items,
        tuple(f"u{u}" for u in range(n_users)), tuple(f"i{i}" for i in range(n_items)),
    )


def plant_cross_cluster_noise(
    log: InteractionLog, ratio: float, rng: np.random.Generator, n_clusters: int = 2
) -> tuple[InteractionLog, np.ndarray]:
    """Replace floor(ratio * |log|) records' items with items from a cluster
    other than the user's own; returns the noisy log and the replaced mask."""
    n = len(log)
    k = int(np.floor(ratio * n))
    items = log.items.copy()
    mask = np.zeros(n, dtype=bool)
    item_cluster = cluster_of(np.arange(log.n_items), log.n_items, n_clusters)
    user_cluster = cluster_of(log.users, log.n_users, n_clusters)
    chosen = np.sort(rng.choice(n, size=k, replace=False))
    for r in chosen.tolist():
        foreign = np.flatnonzero(item_cluster != user_cluster[r])
        items[r] = foreign[rng.integers(0, foreign.size)]
    mask[chosen] = True
    noisy = InteractionLog(
        log.users.copy(), items, log.timestamps.copy(), log.n_users, log.n_items,
        log.user_labels, log.item_labels,
    )
    return noisy, mask
