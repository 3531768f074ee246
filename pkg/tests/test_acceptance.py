"""Acceptance checks. Each test prints one PASS/FAIL line (collected and
repeated in the terminal summary).

Run just these with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import statistics
import time

import numpy as np
import pytest

from selfgnn.checkpoint import to_bytes
from selfgnn.config import HyperParams
from selfgnn.data import sample_ssl_edge_pairs, split_leave_two
from selfgnn.encoder_short import encode_period
from selfgnn.evaluation import edge_short_term_likelihood, evaluate_protocol, sal_case_statistics, with_train
from selfgnn.gradcheck import check_gradients, toy_problem
from selfgnn.losses import likelihood_scores, personalized_weight, sal_hinge, sal_loss
from selfgnn.metrics import hr_at_n, ndcg_at_n, rank_of_positive
from selfgnn.model import SelfGNN
from selfgnn.numerics import ops
from selfgnn.numerics.sparse import SparseMatrix
from selfgnn.numerics.tensor import Tape, Tensor, backward
from selfgnn.streams import stream
from selfgnn.synthetic import clustered_log, plant_cross_cluster_noise
from selfgnn.training import prepare, train

pytestmark = pytest.mark.acceptance

SEEDS = range(5)
# Settings for every experiment on the 20-user / 30-item clustered set.
SYNTHETIC_HP = HyperParams(
    d=16, n_heads=2, layers=2, att_layers=2, n_periods=2, d_sal=8, max_seq=12,
    batch_size=4, lr=1e-2, lambda1=0.1, n_sal=16, patience=10**6,
)

RESULTS: dict[int, str] = {}


def report(number: int, title: str, passed: bool, detail: str) -> bool:
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    RESULTS[number] = line
    print(line)
    return passed


def synthetic_split(seed: int):
    return split_leave_two(clustered_log(seed=seed), seed=seed)


# ---------------------------------------------------------------------------


def criterion_1() -> bool:
    t0 = time.perf_counter()
    loss_fn, params = toy_problem(seed=0)
    rows = check_gradients(loss_fn, params, h=1e-5, tol=1e-3, max_coords=16)
    elapsed = time.perf_counter() - t0
    worst = max((r.rel_error for r in rows if not r.negligible), default=0.0)
    ok = all(r.passed for r in rows) and elapsed < 60
    failed = [r.name for r in rows if not r.passed]
    return report(1, "gradients vs central differences", ok,
                  f"{len(rows)} tensors, worst rel err {worst:.1e}, {elapsed:.0f}s"
                  + (f", failing {failed}" if failed else ""))


def _stop_gradient_setup():
    hp = HyperParams(d=8, n_heads=2, n_periods=3, max_seq=4, d_sal=8, n_sal=16, seed=1)
    split = split_leave_two(clustered_log(n_users=6, n_items=8, n_clusters=1, per_user=6, seed=1), seed=1)
    ctx = prepare(split, hp)
    model = SelfGNN(hp, split.n_users, split.n_items)
    enc = model.encode(ctx.graphs, ctx.seq_items, ctx.seq_mask)
    pairs = sample_ssl_edge_pairs(ctx.graphs, ctx.trainable_users, hp.n_sal, stream(1, "ssl", 0, 0))
    short_u = [s.data for s in enc.short_user]
    short_i = [s.data for s in enc.short_item]
    return model, pairs, short_u, short_i, enc.long_user.data, enc.long_item.data


def _long_grads(model, pairs, short_u, short_i, lu, li, stop, uniform):
    long_u = Tensor(lu.copy(), requires_grad=True)
    long_i = Tensor(li.copy(), requires_grad=True)
    short_u = [Tensor(s, requires_grad=True) for s in short_u]
    short_i = [Tensor(s, requires_grad=True) for s in short_i]
    sal = None if uniform else model.group("sal")
    with Tape() as tape:
        loss = sal_loss(pairs, short_u, short_i, long_u, long_i, sal, stop_long_scores=stop, uniform_weight=uniform)
    g = backward(tape, loss, [long_u, long_i])
    return g[long_u], g[long_i]


def criterion_2() -> bool:
    model, pairs, su, si, lu, li = _stop_gradient_setup()
    # with unit weights the long-term scores are the only route into the long embeddings
    gu_on, gi_on = _long_grads(model, pairs, su, si, lu, li, stop=True, uniform=True)
    gu_off, gi_off = _long_grads(model, pairs, su, si, lu, li, stop=False, uniform=True)
    zero_on = not gu_on.any() and not gi_on.any()
    nonzero_off = bool(np.abs(gu_off).sum() > 0 and np.abs(gi_off).sum() > 0)

    # with learned weights, the stopped loss must match one whose long-term
    # scores are built from frozen copies, bit for bit
    gu_w, gi_w = _long_grads(model, pairs, su, si, lu, li, stop=True, uniform=False)
    long_u = Tensor(lu.copy(), requires_grad=True)
    frozen = Tensor(lu.copy())
    with Tape() as tape:
        total = None
        for t, p in enumerate(pairs):
            u, v, u2, v2 = p.T
            w1 = personalized_weight(ops.take_rows(long_u, u), su[t][u], model.group("sal"))
            w2 = personalized_weight(ops.take_rows(long_u, u2), su[t][u2], model.group("sal"))
            term = sal_hinge(
                w1, w2,
                likelihood_scores(ops.take_rows(frozen, u), li[v]), likelihood_scores(ops.take_rows(frozen, u2), li[v2]),
                likelihood_scores(su[t][u], si[t][v]), likelihood_scores(su[t][u2], si[t][v2]),
            )
            total = term if total is None else total + term
    g_ref = backward(tape, total, [long_u])[long_u]
    same = np.array_equal(gu_w, g_ref) and not gi_w.any()
    ok = zero_on and nonzero_off and same
    return report(2, "stop-gradient on long-term scores", ok,
                  f"stopped grad all zero={zero_on}, unstopped nonzero={nonzero_off}, "
                  f"weight-path grad bitwise equal to frozen-score reference={same}")


def criterion_3() -> bool:
    rng = np.random.default_rng(3)
    worst = 0.0
    n_checked = 0
    for _ in range(200):
        n = 16
        w1, w2 = rng.random(n), rng.random(n)
        l1, l2 = rng.standard_normal(n), rng.standard_normal(n)
        s1 = Tensor(rng.standard_normal(n) * 0.05, requires_grad=True)
        s2 = Tensor(rng.standard_normal(n) * 0.05, requires_grad=True)
        d1 = w1 * l1 - w2 * l2
        active = 1.0 - d1 * (s1.data - s2.data) > 1e-6
        with Tape() as tape:
            loss = sal_hinge(w1, w2, l1, l2, s1, s2)
        g = backward(tape, loss, [s2])[s2]
        worst = max(worst, float(np.max(np.abs(g[active] - d1[active]), initial=0.0)))
        n_checked += int(active.sum())
    closed_form = worst <= 1e-6

    monotone = True
    grid = np.linspace(-3.0, 3.0, 20)
    for d2_sign in (+1.0, -1.0):
        s1, s2 = 0.2, 0.2 - 0.15 * d2_sign
        grads = []
        for sbar2 in grid:
            w2 = Tensor(np.array([0.4]), requires_grad=True)
            with Tape() as tape:
                loss = sal_hinge(np.array([0.7]), w2, np.array([0.5]), np.array([sbar2]),
                                 np.array([s1]), np.array([s2]))
            grads.append(backward(tape, loss, [w2])[w2][0])
        diffs = np.diff(grads) * d2_sign
        monotone &= bool(np.all(diffs > 0))
    ok = closed_form and monotone
    return report(3, "SAL short-score gradient closed form and weight monotonicity", ok,
                  f"{n_checked} active pairs, max |err| {worst:.1e}; monotone on 20-point grid={monotone}")


def criterion_4() -> bool:
    t0 = time.perf_counter()
    hits = []
    for seed in SEEDS:
        split = synthetic_split(seed)
        result = train(split, hp=SYNTHETIC_HP.replace(seed=seed, epochs=200))
        hits.append(evaluate_protocol(result.last, split, (10,)).metrics["hr10"])
    elapsed = time.perf_counter() - t0
    good = sum(h >= 0.95 for h in hits)
    ok = good >= 4 and elapsed < 300
    return report(4, "memorization on clustered data", ok,
                  f"HR@10 per seed {[round(h, 3) for h in hits]}, {good}/5 >= 0.95, {elapsed:.0f}s")


def criterion_5() -> bool:
    wins_a = wins_b = 0
    ratio_wins = 0
    lines = []
    for seed in SEEDS:
        split = synthetic_split(seed)
        noisy, mask = plant_cross_cluster_noise(split.train, 0.15, stream(seed, "noise"))
        ns = with_train(split, noisy)
        hp = SYNTHETIC_HP.replace(seed=seed, epochs=100)
        with_sal = train(ns, hp=hp).last
        without = train(ns, hp=hp.replace(variant="-SAL")).last
        planted = (noisy.users[mask], noisy.items[mask], noisy.timestamps[mask])
        clean = (noisy.users[~mask], noisy.items[~mask], noisy.timestamps[~mask])
        a1 = edge_short_term_likelihood(with_sal, ns, *planted).mean()
        a0 = edge_short_term_likelihood(without, ns, *planted).mean()
        c1 = edge_short_term_likelihood(with_sal, ns, *clean).mean()
        c0 = edge_short_term_likelihood(without, ns, *clean).mean()
        stats = sal_case_statistics(with_sal, without, ns, zip(planted[0], planted[1]))
        wins_a += a1 < a0
        wins_b += stats["with_sal"] < stats["without_sal"]
        ratio_wins += a1 / c1 < a0 / c0
        lines.append(f"s_t {a1:.2f}/{a0:.2f} cos {stats['with_sal']:.2f}/{stats['without_sal']:.2f}")
    ok = wins_a >= 4 and wins_b >= 4
    return report(5, "denoising direction with vs without SAL", ok,
                  f"(a) planted s_t lower in {wins_a}/5, (b) peer cosine lower in {wins_b}/5 "
                  f"[planted/clean s_t ratio lower in {ratio_wins}/5; per seed {'; '.join(lines)}]")


def criterion_6() -> bool:
    variants = ("full", "-SAL", "-STG", "-CF")
    hits = {v: [] for v in variants}
    for seed in SEEDS:
        split = synthetic_split(seed)
        hp = SYNTHETIC_HP.replace(seed=seed, epochs=100)
        for v in variants:
            result = train(split, hp=hp.replace(variant=v))
            hits[v].append(evaluate_protocol(result.last, split, (10,)).metrics["hr10"])
    means = {v: float(np.mean(h)) for v, h in hits.items()}
    ok = all(means["full"] >= means[v] for v in variants[1:])
    return report(6, "ablation ordering", ok, "mean HR@10 " + ", ".join(f"{v} {m:.3f}" for v, m in means.items()))


def _oracle_rank(pos_score, pos_item, neg_scores, neg_items) -> int:
    cands = [(pos_score, pos_item)] + list(zip(neg_scores.tolist(), neg_items.tolist()))
    ordered = sorted(cands, key=lambda c: (-c[0], c[1]))
    return ordered.index((pos_score, pos_item)) + 1


def _oracle_metrics(rank: int, n: int) -> tuple[float, float]:
    gains = [1.0 if k == rank else 0.0 for k in range(1, n + 1)]
    dcg = sum(g / math.log2(k + 1) for k, g in enumerate(gains, start=1))
    return float(any(gains)), dcg  # ideal DCG of one relevant item is 1


def criterion_7() -> bool:
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(1000):
        n_neg = int(rng.integers(5, 200))
        items = rng.permutation(5000)[: n_neg + 1]
        scores = np.round(rng.standard_normal(n_neg + 1), 1)  # coarse values force ties
        rank = rank_of_positive(scores[0], items[0], scores[1:], items[1:])
        oracle = _oracle_rank(float(scores[0]), int(items[0]), scores[1:], items[1:])
        for n in (1, 5, 10, 20):
            hr, ndcg = _oracle_metrics(oracle, n)
            mismatches += rank != oracle or hr_at_n(rank, n) != hr or ndcg_at_n(rank, n) != ndcg
    exact = mismatches == 0

    trials = 10_000
    hits = 0
    for _ in range(trials):
        s = rng.random(1000)
        items = rng.permutation(1000)
        hits += hr_at_n(rank_of_positive(s[0], items[0], s[1:], items[1:]), 10)
    p = 10 / 1000
    sigma = math.sqrt(p * (1 - p) / trials)
    mean = hits / trials
    sane = abs(mean - p) <= 3 * sigma
    return report(7, "metric oracles", exact and sane,
                  f"{mismatches} mismatches on 1000 lists; random E[HR@10]={mean:.4f} "
                  f"(expected 0.0100 +/- {3 * sigma:.4f})")


def _random_graph(n_users, n_items, n_edges, rng):
    flat = rng.choice(n_users * n_items, size=n_edges, replace=False)
    rows, cols = np.divmod(flat, n_items)
    return SparseMatrix.from_coo(rows, cols, 1.0, (n_users, n_items))


def criterion_8() -> bool:
    rng = np.random.default_rng(8)
    n_users = n_items = 3000
    d, layers, periods = 64, 2, 3
    users = [rng.standard_normal((n_users, d)) * 0.01 for _ in range(periods)]
    items = [rng.standard_normal((n_items, d)) * 0.01 for _ in range(periods)]

    def timed(n_edges):
        graphs = [_random_graph(n_users, n_items, n_edges, rng) for _ in range(periods)]
        for g in graphs:
            g.T  # build the cached transpose outside the timed region

        def run():
            for t in range(periods):
                encode_period(graphs[t], users[t], items[t], layers, training=False)

        run()
        samples = []
        for _ in range(15):
            t0 = time.perf_counter()
            run()
            samples.append(time.perf_counter() - t0)
        return statistics.median(samples)

    small, large = timed(10_000), timed(20_000)
    ratio = large / small
    return report(8, "short-term encoding scales linearly in edges", ratio <= 2.5,
                  f"10k edges {small * 1e3:.1f} ms, 20k edges {large * 1e3:.1f} ms, ratio {ratio:.2f}")


def criterion_9() -> bool:
    split = synthetic_split(0)
    hp = SYNTHETIC_HP.replace(epochs=6, seed=11)
    a = train(split, hp=hp)
    b = train(split, hp=hp)
    identical = to_bytes(a.last) == to_bytes(b.last) and to_bytes(a.best) == to_bytes(b.best)
    half = train(split, hp=hp, epochs=3)
    resumed = train(split, resume=half.last, epochs=6)
    resume_ok = to_bytes(resumed.last) == to_bytes(a.last)
    return report(9, "determinism and resume", identical and resume_ok,
                  f"repeat run bitwise identical={identical}, resumed run bitwise identical={resume_ok}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda f: f.__name__)
def test_criterion(criterion):
    assert criterion(), RESULTS.get(int(criterion.__name__.rsplit("_", 1)[1]))


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria pass")
