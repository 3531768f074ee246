import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selfgnn.data import (
    InteractionIndex,
    InteractionLog,
    build_instance_sequences,
    core_filter,
    load_interactions,
    pad_sequences,
    partition_intervals,
    period_of,
    sample_ssl_edge_pairs,
    save_interactions,
    split_leave_two,
)
from selfgnn.errors import DataError
from selfgnn.synthetic import clustered_log


def write(tmp_path, text, name="log.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_reindexes_and_drops_exact_duplicates(tmp_path):
    path = write(tmp_path, "user,item,timestamp\nbob,x,5\nann,y,1\nbob,y,2\nbob,x,5\nann,x,0\n")
    log = load_interactions(path)
    assert log.user_labels == ("bob", "ann")
    assert len(log) == 4
    # items numbered by first appearance in (user, time) order: bob@2 -> y, bob@5 -> x
    assert log.item_labels == ("y", "x")
    assert log.records() == [(0, 0, 2), (0, 1, 5), (1, 1, 0), (1, 0, 1)]


def test_save_then_load_is_identity(tmp_path):
    log = load_interactions(write(tmp_path, "user,item,timestamp,rating\na,p,3,5\nb,q,1,4\na,q,1,1\n"))
    out = tmp_path / "again.csv"
    save_interactions(log, out)
    again = load_interactions(out)
    assert again.records() == log.records()
    assert again.item_labels == log.item_labels and again.user_labels == log.user_labels


@pytest.mark.parametrize(
    "text, line",
    [
        ("user,item,time\n", "line 1"),
        ("user,item,timestamp\na,b,1\na,b\n", "line 3"),
        ("user,item,timestamp\na,b,soon\n", "line 2"),
        ("user,item,timestamp\n,b,1\n", "line 2"),
    ],
)
def test_malformed_rows_name_the_line(tmp_path, text, line):
    with pytest.raises(DataError, match=line):
        load_interactions(write(tmp_path, text))


def test_core_filter_reaches_fixed_point():
    # user 2 has one interaction; dropping it starves item 2, which drops user 1's third record
    log = InteractionLog.from_arrays([0, 0, 1, 1, 1, 2], [0, 1, 0, 1, 2, 2], range(6))
    out = core_filter(log, 2)
    assert out.n_users == 2 and out.n_items == 2 and len(out) == 4
    assert np.all(out.user_counts() >= 2)


def test_core_filter_can_empty_the_log():
    with pytest.raises(DataError):
        core_filter(InteractionLog.from_arrays([0], [0], [0]), 5)


def test_split_holds_out_last_two_per_user():
    log = clustered_log(seed=3)
    split = split_leave_two(log, seed=3)
    assert len(split.train) == len(log) - 2 * log.n_users
    for u in range(log.n_users):
        ts = log.timestamps[log.users == u]
        items = log.items[log.users == u]
        assert split.test.as_dict()[u] == items[np.argmax(ts)]
        assert split.validation.as_dict()[u] == items[np.argsort(ts)[-2]]
        negs = split.negatives[u]
        assert len(np.unique(negs)) == len(negs)
        assert not np.isin(negs, items).any()
    # 30 items, 12 seen -> 18 negatives, shortfall recorded
    assert split.shortfall[0] == 999 - 18


def test_split_excludes_short_users_and_caps_test_set():
    log = InteractionLog.from_arrays([0, 0, 1, 1, 1, 2, 2, 2], [0, 1, 0, 1, 2, 2, 3, 4], range(8), n_items=50)
    split = split_leave_two(log, test_user_cap=1, seed=0, n_negatives=5)
    assert split.test_users.size == 1 and split.test_users[0] in (1, 2)
    assert 0 not in split.validation.as_dict()


def test_manifest_is_deterministic(tmp_path):
    a = split_leave_two(clustered_log(seed=1), seed=9).manifest()
    b = split_leave_two(clustered_log(seed=1), seed=9).manifest()
    assert a == b


def test_period_boundaries():
    np.testing.assert_array_equal(period_of([0, 4, 5, 9, 10], 0, 10, 2), [0, 0, 1, 1, 1])
    np.testing.assert_array_equal(period_of([7, 7], 7, 7, 3), [0, 0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 10**12), min_size=2, max_size=40), st.integers(1, 9))
def test_period_of_is_monotone_and_in_range(ts, n):
    ts = np.sort(np.array(ts))
    p = period_of(ts, ts.min(), ts.max(), n)
    assert p.min() >= 0 and p.max() <= n - 1
    assert np.all(np.diff(p) >= 0)


def test_intervals_partition_the_training_edges():
    log = clustered_log(seed=0)
    graphs = partition_intervals(log, 3)
    assert sum(g.n_edges for g in graphs) == len(log)  # no repeated (u, i, period) in this set
    assert graphs[0].t_start == log.timestamps.min() and graphs[-1].t_end == log.timestamps.max()


def test_single_timestamp_cannot_be_split():
    with pytest.raises(DataError):
        partition_intervals(InteractionLog.from_arrays([0, 1], [0, 1], [5, 5]), 2)


def test_sequences_keep_most_recent_and_left_pad():
    log = InteractionLog.from_arrays([0, 0, 0, 1], [3, 1, 2, 4], [30, 10, 20, 0], n_users=3)
    seqs = build_instance_sequences(log, 2)
    np.testing.assert_array_equal(seqs[0].item_ids, [2, 3])
    idx, mask = pad_sequences(seqs, 3)
    np.testing.assert_array_equal(idx, [[0, 2, 3], [0, 0, 4], [0, 0, 0]])
    np.testing.assert_array_equal(mask, [[0, 1, 1], [0, 0, 1], [0, 0, 0]])


def test_negatives_avoid_observed_items():
    log = clustered_log(seed=2)
    index = InteractionIndex(log)
    rng = np.random.default_rng(0)
    for u in range(log.n_users):
        negs = index.sample_negatives(u, 10, rng)
        assert not index.contains(u, negs).any()
        assert len(set(negs.tolist())) == 10


def test_negatives_for_saturated_user_fail():
    index = InteractionIndex(InteractionLog.from_arrays([0, 0], [0, 1], [0, 1]))
    with pytest.raises(DataError):
        index.sample_negatives(0, 1, np.random.default_rng(0))


def test_ssl_pairs_are_real_edges_grounded_in_batch():
    log = clustered_log(seed=0)
    graphs = partition_intervals(log, 2)
    batch = np.array([1, 4, 7])
    for scope in ("batch", "per_user"):
        pairs = sample_ssl_edge_pairs(graphs, batch, 5, np.random.default_rng(0), scope)
        for g, p in zip(graphs, pairs):
            dense = g.adjacency.to_dense()
            assert np.isin(p[:, 0], batch).all()
            assert (dense[p[:, 0], p[:, 1]] > 0).all() and (dense[p[:, 2], p[:, 3]] > 0).all()
