import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selfgnn.config import HyperParams
from selfgnn.data import split_leave_two
from selfgnn.evaluation import (
    cohort_labels,
    evaluate_protocol,
    inject_noise,
    mean_peer_similarity,
    run_ablation,
    sparsity_cohorts,
)
from selfgnn.metrics import candidate_ranks, hr_at_n, ndcg_at_n, rank_of_positive, summarize_ranks
from selfgnn.model import SelfGNN
from selfgnn.synthetic import clustered_log, plant_cross_cluster_noise


def test_metric_examples():
    assert hr_at_n(1, 10) == 1 and hr_at_n(11, 10) == 0
    assert ndcg_at_n(1, 10) == 1.0
    assert ndcg_at_n(3, 10) == pytest.approx(0.5)
    assert ndcg_at_n(11, 10) == 0.0
    with pytest.raises(ValueError):
        hr_at_n(1, 0)


def test_ties_break_by_ascending_item_id():
    assert rank_of_positive(1.0, 5, [1.0, 1.0, 0.0], [3, 7, 1]) == 2
    assert rank_of_positive(1.0, 0, [1.0, 1.0], [3, 7]) == 1


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 2000), st.integers(1, 50))
def test_ndcg_never_exceeds_hr(rank, n):
    hr, ndcg = hr_at_n(rank, n), ndcg_at_n(rank, n)
    assert ndcg <= hr
    assert (ndcg == hr) == (rank == 1 or rank > n)


def test_ranks_invariant_to_candidate_order(rng):
    items = rng.standard_normal((30, 4))
    items[5] = items[9]  # force a tie
    user = rng.standard_normal((1, 4))
    negs = np.array([9, 1, 2, 3, 20, 25])
    a = candidate_ranks(user, items, [5], [negs])
    b = candidate_ranks(user, items, [5], [negs[::-1]])
    assert a.tolist() == b.tolist()


def test_summary_of_known_ranks():
    out = summarize_ranks([1, 3, 30], (10,))
    assert out["hr10"] == pytest.approx(2 / 3)
    assert out["ndcg10"] == pytest.approx((1 + 0.5) / 3)


def test_inject_noise_preserves_size_users_and_times(rng):
    log = clustered_log(seed=5)
    noisy, mask = inject_noise(log, 0.2, rng, return_mask=True)
    assert len(noisy) == len(log) and mask.sum() == math.floor(0.2 * len(log))
    np.testing.assert_array_equal(noisy.users, log.users)
    np.testing.assert_array_equal(noisy.timestamps, log.timestamps)
    assert np.all(noisy.items[mask] != log.items[mask])
    np.testing.assert_array_equal(noisy.items[~mask], log.items[~mask])
    assert inject_noise(log, 0.0, rng).records() == log.records()
    with pytest.raises(ValueError):
        inject_noise(log, 1.0, rng)


def test_cross_cluster_noise_leaves_own_cluster(rng):
    log = clustered_log(seed=5)
    noisy, mask = plant_cross_cluster_noise(log, 0.15, rng)
    user_cluster = (noisy.users[mask] * 2) // log.n_users
    item_cluster = (noisy.items[mask] * 2) // log.n_items
    assert mask.sum() == math.floor(0.15 * len(log))
    assert np.all(user_cluster != item_cluster)


def test_cohorts_are_half_open():
    assert cohort_labels([15, 25]) == ["0-15", "15-25", "25+"]
    log = clustered_log(n_users=4, n_items=60, n_clusters=1, per_user=12)
    # give users 14, 15, 24 and 25 training records (+2 held out each)
    users, items, ts = [], [], []
    for u, n in enumerate([16, 17, 26, 27]):
        users += [u] * n
        items += list(range(n))
        ts += list(range(n))
    from selfgnn.data import InteractionLog
    split = split_leave_two(InteractionLog.from_arrays(users, items, ts, 4, 60), seed=0)
    labels = sparsity_cohorts(split, [15, 25])
    assert [labels[u] for u in range(4)] == ["0-15", "15-25", "15-25", "25+"]
    with pytest.raises(ValueError):
        sparsity_cohorts(split, [25, 15])


def test_report_schema():
    split = split_leave_two(clustered_log(seed=0), seed=0)
    hp = HyperParams(d=8, n_heads=2, n_periods=2, max_seq=10)
    report = evaluate_protocol(SelfGNN(hp, split.n_users, split.n_items), split, cohort_boundaries=[9])
    data = json.loads(report.to_json())
    assert set(data) == {"variant", "noise_ratio", "n_users", "metrics", "cohorts"}
    assert set(data["metrics"]) == {"hr10", "ndcg10", "hr20", "ndcg20"}
    assert sum(c["n_users"] for c in data["cohorts"]) == data["n_users"] == 20


def test_peer_similarity_trivial_cases():
    same = np.ones((3, 2))
    assert mean_peer_similarity(same, [(0, 0)], {0: [0, 1, 2]}) == pytest.approx(1.0)
    ortho = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 2.0]])
    assert mean_peer_similarity(ortho, [(0, 0)], {0: [0, 1, 2]}) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        mean_peer_similarity(ortho, [], {})


def test_unknown_ablation_variant():
    with pytest.raises(ValueError, match="unknown variant"):
        run_ablation("-FOO", None, HyperParams())
