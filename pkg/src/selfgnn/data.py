"""Interaction logs: ingestion, k-core filtering, leave-two splitting, interval
graphs, instance sequences and the stochastic samplers used in training."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .numerics.sparse import SparseMatrix


@dataclass(frozen=True)
class InteractionLog:
    """Timestamped (user, item) events with dense ids, sorted by (user, timestamp)."""

    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray
    n_users: int
    n_items: int
    user_labels: tuple = ()
    item_labels: tuple = ()

    def __len__(self) -> int:
        return int(self.users.shape[0])

    @classmethod
    def from_arrays(cls, users, items, timestamps, n_users=None, n_items=None, user_labels=(), item_labels=()):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        timestamps = np.asarray(timestamps, dtype=np.int64)
        order = np.lexsort((timestamps, users))
        n_users = int(users.max() + 1) if n_users is None else int(n_users)
        n_items = int(items.max() + 1) if n_items is None else int(n_items)
        return cls(
            users[order], items[order], timestamps[order], n_users, n_items,
            tuple(user_labels), tuple(item_labels),
        )

    def records(self) -> list[tuple[int, int, int]]:
        return list(zip(self.users.tolist(), self.items.tolist(), self.timestamps.tolist()))

    def user_slices(self) -> np.ndarray:
        """``indptr`` such that user u's records are ``[indptr[u], indptr[u+1])``."""
        indptr = np.zeros(self.n_users + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.users, minlength=self.n_users), out=indptr[1:])
        return indptr

    def user_counts(self) -> np.ndarray:
        return np.bincount(self.users, minlength=self.n_users)

    def subset(self, keep: np.ndarray) -> "InteractionLog":
        keep = np.asarray(keep)
        return InteractionLog(
            self.users[keep], self.items[keep], self.timestamps[keep],
            self.n_users, self.n_items, self.user_labels, self.item_labels,
        )


@dataclass(frozen=True)
class IntervalGraph:
    period: int
    adjacency: SparseMatrix
    t_start: float
    t_end: float

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz


@dataclass(frozen=True)
class HeldOut:
    """One held-out interaction per eligible user (arrays aligned by position)."""

    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.users.tolist(), self.items.tolist()))


@dataclass
class SplitDataset:
    train: InteractionLog
    validation: HeldOut
    test: HeldOut
    test_users: np.ndarray
    negatives: dict[int, np.ndarray]
    seed: int
    full: InteractionLog | None = None
    shortfall: dict[int, int] = field(default_factory=dict)

    @property
    def n_users(self) -> int:
        return self.train.n_users

    @property
    def n_items(self) -> int:
        return self.train.n_items

    def manifest(self) -> dict:
        val = self.validation.as_dict()
        test = self.test.as_dict()
        return {
            "seed": self.seed,
            "n_users": self.n_users,
            "n_items": self.n_items,
            "n_train": len(self.train),
            "test_users": [
                {
                    "user": u,
                    "validation_item": val[u],
                    "test_item": test[u],
                    "negatives": self.negatives[u].tolist(),
                }
                for u in self.test_users.tolist()
            ],
            "negative_shortfall": {str(k): v for k, v in sorted(self.shortfall.items())},
        }

    def save_manifest(self, path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=1, sort_keys=True))


@dataclass(frozen=True)
class InstanceSequence:
    user_id: int
    item_ids: np.ndarray
    valid_length: int


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def load_interactions(path) -> InteractionLog:
    """Read ``user,item,timestamp[,rating]`` CSV; ids re-indexed densely.

    User ids follow first appearance in the file. Item ids follow first
    appearance after records are sorted by (user, timestamp), which makes
    :func:`save_interactions` output reload to identical ids. Exact duplicate
    (user, item, timestamp) rows collapse to one record.
    """
    path = Path(path)
    raw_users, raw_items, stamps = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip().lower() for h in header]
        if header[:3] != ["user", "item", "timestamp"] or len(header) > 4:
            raise DataError(f"{path}: line 1: expected header user,item,timestamp[,rating], got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            user, item, ts = (c.strip() for c in row[:3])
            if not user or not item:
                raise DataError(f"{path}: line {lineno}: empty user or item id")
            try:
                stamp = int(ts)
            except ValueError:
                raise DataError(f"{path}: line {lineno}: timestamp {ts!r} is not an integer") from None
            raw_users.append(user)
            raw_items.append(item)
            stamps.append(stamp)
    if not raw_users:
        raise DataError(f"{path}: no interactions")

    user_ids: dict[str, int] = {}
    users = np.array([user_ids.setdefault(u, len(user_ids)) for u in raw_users], dtype=np.int64)
    stamps_arr = np.array(stamps, dtype=np.int64)
    order = np.lexsort((stamps_arr, users))

    item_ids: dict[str, int] = {}
    seen: set = set()
    keep_u, keep_i, keep_t = [], [], []
    for k in order.tolist():
        iid = item_ids.setdefault(raw_items[k], len(item_ids))
        key = (int(users[k]), iid, stamps[k])
        if key in seen:
            continue
        seen.add(key)
        keep_u.append(key[0])
        keep_i.append(iid)
        keep_t.append(key[2])
    return InteractionLog(
        np.array(keep_u, dtype=np.int64),
        np.array(keep_i, dtype=np.int64),
        np.array(keep_t, dtype=np.int64),
        len(user_ids),
        len(item_ids),
        tuple(user_ids),
        tuple(item_ids),
    )


def save_interactions(log: InteractionLog, path) -> None:
    """Canonical CSV export using the original labels when known."""
    ul = log.user_labels or tuple(str(i) for i in range(log.n_users))
    il = log.item_labels or tuple(str(i) for i in range(log.n_items))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "item", "timestamp"])
        for u, i, t in log.records():
            w.writerow([ul[u], il[i], t])


def _reindex(log: InteractionLog, keep: np.ndarray) -> InteractionLog:
    users, items = log.users[keep], log.items[keep]
    u_old = np.unique(users)
    i_old = np.unique(items)
    u_map = np.full(log.n_users, -1, dtype=np.int64)
    i_map = np.full(log.n_items, -1, dtype=np.int64)
    u_map[u_old] = np.arange(u_old.size)
    i_map[i_old] = np.arange(i_old.size)
    ul = tuple(log.user_labels[k] for k in u_old) if log.user_labels else ()
    il = tuple(log.item_labels[k] for k in i_old) if log.item_labels else ()
    return InteractionLog(
        u_map[users], i_map[items], log.timestamps[keep], int(u_old.size), int(i_old.size), ul, il
    )


def core_filter(log: InteractionLog, k: int) -> InteractionLog:
    """Drop users and items with fewer than ``k`` interactions until stable."""
    if k < 1:
        raise ValueError("k must be >= 1")
    keep = np.ones(len(log), dtype=bool)
    while True:
        u_deg = np.bincount(log.users[keep], minlength=log.n_users)
        i_deg = np.bincount(log.items[keep], minlength=log.n_items)
        bad = keep & ((u_deg[log.users] < k) | (i_deg[log.items] < k))
        if not bad.any():
            break
        keep &= ~bad
    if not keep.any():
        raise DataError(f"{k}-core filtering removed every interaction")
    return _reindex(log, keep)


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


def split_leave_two(
    log: InteractionLog, test_user_cap: int = 10_000, seed: int = 0, n_negatives: int = 999
) -> SplitDataset:
    """Last interaction per user is test, penultimate is validation.

    Users with fewer than three interactions stay entirely in train and are
    not eligible for evaluation. Negatives are drawn without replacement from
    items the user never interacted with (in any split); when fewer than
    ``n_negatives`` exist, all of them are used and the shortfall recorded.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    indptr = log.user_slices()
    counts = np.diff(indptr)
    eligible = np.flatnonzero(counts >= 3)

    is_train = np.ones(len(log), dtype=bool)
    last = indptr[eligible + 1] - 1
    is_train[last] = False
    is_train[last - 1] = False
    validation = HeldOut(eligible.copy(), log.items[last - 1], log.timestamps[last - 1])
    test = HeldOut(eligible.copy(), log.items[last], log.timestamps[last])

    n_test = min(int(test_user_cap), eligible.size)
    test_users = np.sort(rng.choice(eligible, size=n_test, replace=False)) if n_test else eligible[:0]

    negatives: dict[int, np.ndarray] = {}
    shortfall: dict[int, int] = {}
    all_items = np.arange(log.n_items, dtype=np.int64)
    for u in test_users.tolist():
        seen = np.unique(log.items[indptr[u] : indptr[u + 1]])
        pool = np.setdiff1d(all_items, seen, assume_unique=True)
        if pool.size < n_negatives:
            shortfall[u] = n_negatives - int(pool.size)
            negatives[u] = rng.permutation(pool)
        else:
            negatives[u] = rng.choice(pool, size=n_negatives, replace=False)
    return SplitDataset(
        train=log.subset(is_train),
        validation=validation,
        test=test,
        test_users=test_users,
        negatives=negatives,
        seed=int(seed),
        full=log,
        shortfall=shortfall,
    )


# ---------------------------------------------------------------------------
# interval graphs and sequences
# ---------------------------------------------------------------------------


def period_of(timestamps, t_begin: int, t_end: int, n_periods: int) -> np.ndarray:
    """Index of the equal-width interval holding each timestamp.

    Intervals are half-open ``[start, end)`` except the last, which also
    holds ``t_end``.
    """
    ts = np.asarray(timestamps, dtype=np.int64)
    span = int(t_end) - int(t_begin)
    if span == 0:
        return np.zeros(ts.shape, dtype=np.int64)
    # integer arithmetic keeps boundary timestamps in the right interval
    idx = ((ts - int(t_begin)) * int(n_periods)) // span
    return np.clip(idx, 0, n_periods - 1)


def partition_intervals(train: InteractionLog, n_periods: int) -> list[IntervalGraph]:
    if n_periods < 1:
        raise ValueError("number of periods must be >= 1")
    if len(train) == 0:
        raise DataError("cannot partition an empty log")
    t_b, t_e = int(train.timestamps.min()), int(train.timestamps.max())
    if t_b == t_e and n_periods > 1:
        raise DataError("all interactions share one timestamp; cannot form more than one interval")
    period = period_of(train.timestamps, t_b, t_e, n_periods)
    width = (t_e - t_b) / n_periods
    graphs = []
    for t in range(n_periods):
        sel = period == t
        pairs = np.unique(np.stack([train.users[sel], train.items[sel]], axis=1), axis=0)
        adj = SparseMatrix.from_coo(pairs[:, 0], pairs[:, 1], 1.0, (train.n_users, train.n_items))
        t_end = float(t_e) if t == n_periods - 1 else t_b + (t + 1) * width
        graphs.append(IntervalGraph(t, adj, t_b + t * width, t_end))
    return graphs


def build_instance_sequences(train: InteractionLog, max_len: int) -> list[InstanceSequence]:
    """Per-user chronological item list, keeping the ``max_len`` most recent."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    order = np.lexsort((train.timestamps, train.users))
    users, items = train.users[order], train.items[order]
    indptr = np.zeros(train.n_users + 1, dtype=np.int64)
    np.cumsum(np.bincount(users, minlength=train.n_users), out=indptr[1:])
    out = []
    for u in range(train.n_users):
        seq = items[indptr[u] : indptr[u + 1]][-max_len:]
        out.append(InstanceSequence(u, seq.copy(), int(seq.size)))
    return out


def pad_sequences(sequences: list[InstanceSequence], max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Left-pad to ``(n_users, max_len)``; returns item index (0 at pads) and validity mask."""
    idx = np.zeros((len(sequences), max_len), dtype=np.int64)
    mask = np.zeros((len(sequences), max_len), dtype=bool)
    for row, s in enumerate(sequences):
        n = s.valid_length
        if n > max_len:
            raise ValueError(f"sequence for user {s.user_id} longer than {max_len}")
        if n:
            idx[row, max_len - n :] = s.item_ids
            mask[row, max_len - n :] = True
    return idx, mask


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


class InteractionIndex:
    """Sorted per-user item sets for fast membership tests and negative draws."""

    def __init__(self, log: InteractionLog):
        self.n_users = log.n_users
        self.n_items = log.n_items
        order = np.lexsort((log.items, log.users))
        pairs = np.unique(np.stack([log.users[order], log.items[order]], axis=1), axis=0)
        self._items = pairs[:, 1].copy()
        self._indptr = np.zeros(log.n_users + 1, dtype=np.int64)
        np.cumsum(np.bincount(pairs[:, 0], minlength=log.n_users), out=self._indptr[1:])

    def items_of(self, user: int) -> np.ndarray:
        return self._items[self._indptr[user] : self._indptr[user + 1]]

    def contains(self, user: int, items) -> np.ndarray:
        own = self.items_of(user)
        items = np.asarray(items, dtype=np.int64)
        if own.size == 0:
            return np.zeros(items.shape, dtype=bool)
        pos = np.minimum(np.searchsorted(own, items), own.size - 1)
        return own[pos] == items

    def sample_negatives(self, user: int, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` items the user never interacted with, distinct when possible."""
        if not 0 <= user < self.n_users:
            raise DataError(f"unknown user {user}")
        own = self.items_of(user)
        n_free = self.n_items - own.size
        if n_free <= 0:
            raise DataError(f"user {user} has interacted with every item")
        if n_free <= 4 * n or 2 * own.size >= self.n_items:
            pool = np.setdiff1d(np.arange(self.n_items, dtype=np.int64), own, assume_unique=True)
            return rng.choice(pool, size=n, replace=n > n_free)
        out: list[int] = []
        taken: set = set()
        while len(out) < n:
            cand = rng.integers(0, self.n_items, size=2 * n)
            cand = cand[~self.contains(user, cand)]
            for c in cand.tolist():
                if c not in taken:
                    taken.add(c)
                    out.append(c)
                    if len(out) == n:
                        break
        return np.array(out, dtype=np.int64)

    def sample_positives(self, user: int, n: int, rng: np.random.Generator) -> np.ndarray:
        own = self.items_of(user)
        if own.size == 0:
            raise DataError(f"user {user} has no interactions")
        return rng.choice(own, size=n, replace=n > own.size)


def sample_negatives(index: InteractionIndex, user: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return index.sample_negatives(user, n, rng)


def sample_ssl_edge_pairs(
    graphs: list[IntervalGraph],
    batch_users,
    n_sal: int,
    rng: np.random.Generator,
    scope: str = "batch",
) -> list[np.ndarray]:
    """Per period, an ``(n, 4)`` array of edge pairs ``[u, v, u', v']``.

    The first edge is grounded in ``batch_users``; the second is uniform over
    all edges of the period's graph. With ``scope="batch"`` each period yields
    ``n_sal`` pairs whose first edge is uniform over batch-incident edges; with
    ``scope="per_user"`` each batch user owning edges yields ``n_sal`` pairs.
    """
    if scope not in ("batch", "per_user"):
        raise ValueError(f"unknown SSL sampling scope {scope!r}")
    batch_users = np.asarray(batch_users, dtype=np.int64)
    out = []
    for g in graphs:
        adj = g.adjacency
        rows, cols = adj.rows, adj.cols
        if adj.nnz == 0 or n_sal <= 0:
            out.append(np.zeros((0, 4), dtype=np.int64))
            continue
        if scope == "batch":
            incident = np.flatnonzero(np.isin(rows, batch_users))
            if incident.size == 0:
                out.append(np.zeros((0, 4), dtype=np.int64))
                continue
            first = incident[rng.integers(0, incident.size, size=n_sal)]
        else:
            chunks = []
            for u in np.unique(batch_users).tolist():
                lo, hi = adj.indptr[u], adj.indptr[u + 1]
                if hi > lo:
                    chunks.append(rng.integers(lo, hi, size=n_sal))
            if not chunks:
                out.append(np.zeros((0, 4), dtype=np.int64))
                continue
            first = np.concatenate(chunks)
        second = rng.integers(0, adj.nnz, size=first.size)
        out.append(np.stack([rows[first], cols[first], rows[second], cols[second]], axis=1))
    return out
