import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adfield import evaluation as E, field, synth

TABLE = [  # threshold, matched, baseline-only, detection-only, precision %, recall %, f1 %
    (150, 16606, 10758, 4163, 79.96, 60.69, 69.00),
    (200, 17225, 10492, 3544, 82.94, 62.15, 71.05),
    (300, 17953, 10056, 2816, 86.44, None, None),
]


@pytest.mark.parametrize("thr,m,ua,ub,p,r,f", TABLE)
def test_metric_arithmetic(thr, m, ua, ub, p, r, f):
    rep = E.report_from_counts(m, ua, ub, thr)
    assert 100 * rep.precision == pytest.approx(p, abs=0.01)
    if r is not None:
        assert 100 * rep.recall == pytest.approx(r, abs=0.01)
        assert 100 * rep.f1 == pytest.approx(f, abs=0.01)


def test_zero_counts():
    rep = E.report_from_counts(0, 0, 0)
    assert rep.precision == rep.recall == rep.f1 == 0.0


def test_identical_sets(rng):
    pts = rng.uniform(0, 1e4, (50, 3))
    for thr in (0.5, 10.0, 500.0):
        rep = E.spatial_match(pts, pts, thr)
        assert rep.precision == rep.recall == rep.f1 == 1.0


def test_separated_clusters_never_match(rng):
    a = rng.normal(0, 20, (30, 3))
    b = rng.normal(0, 20, (30, 3)) + [1e4, 0, 0]
    rep = E.spatial_match(a, b, 200.0)
    assert rep.matched == 0 and rep.unique_a == 30 and rep.unique_b == 30


def test_empty_sets():
    rep = E.spatial_match(np.zeros((0, 3)), np.ones((4, 3)), 10.0)
    assert (rep.matched, rep.unique_a, rep.unique_b) == (0, 0, 4)


def test_threshold_must_be_positive():
    with pytest.raises(ValueError):
        E.spatial_match(np.zeros((1, 3)), np.zeros((1, 3)), 0.0)


def test_single_shared_point():
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[30.0, 40.0, 0.0]])
    reps = E.threshold_sweep(a, b, [10, 49.9, 50, 100, 1000])
    assert [r.matched for r in reps] == [0, 0, 1, 1, 1]


def test_greedy_is_nearest_first_one_to_one():
    a = np.array([[0.0, 0, 0], [10.0, 0, 0]])
    b = np.array([[6.0, 0, 0]])
    rep = E.spatial_match(a, b, 100.0)
    assert rep.matched == 1 and rep.unique_a == 1
    # nearest pair goes first: b pairs with a[1] (4 m) not a[0] (6 m)
    ia, ib, d = E.candidate_pairs(a, b, 100.0)
    assert (ia[0], ib[0], d[0]) == (1, 0, 4.0)


def brute_greedy(a, b, thr):
    """Oracle: enumerate all pairs, sort by (distance, i, j), consume greedily."""
    pairs = sorted((float(np.linalg.norm(a[i] - b[j])), i, j)
                   for i, j in itertools.product(range(len(a)), range(len(b))))
    ua, ub, m = set(), set(), 0
    for d, i, j in pairs:
        if d <= thr and i not in ua and j not in ub:
            ua.add(i)
            ub.add(j)
            m += 1
    return m


@given(st.integers(0, 40), st.integers(0, 40), st.integers(0, 10**6))
def test_matching_properties(na, nb, seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 30, (na, 3)).astype(float) * 10
    b = rng.integers(0, 30, (nb, 3)).astype(float) * 10
    thrs = [5.0, 15.0, 40.0, 120.0]
    reps = E.threshold_sweep(a, b, thrs)
    counts = [r.matched for r in reps]
    assert counts == sorted(counts)
    for thr, r in zip(thrs, reps):
        assert r.matched == brute_greedy(a, b, thr) == E.spatial_match(a, b, thr).matched
        assert r.matched <= min(na, nb)
        assert r.matched + r.unique_a == na and r.matched + r.unique_b == nb
        swapped = E.spatial_match(b, a, thr)
        assert swapped.matched == r.matched
        assert swapped.precision == pytest.approx(r.recall) and swapped.recall == pytest.approx(r.precision)


def test_as_row_has_metrics():
    row = E.report_from_counts(3, 1, 2, 150.0).as_row()
    assert set(row) == {"threshold_m", "matched", "unique_a", "unique_b", "precision", "recall", "f1"}


def test_bench_queries_are_seeded():
    pts = synth.scored_points(1000, seed=0)
    np.testing.assert_array_equal(E.bench_queries(pts, 100, 7), E.bench_queries(pts, 100, 7))
    assert not np.array_equal(E.bench_queries(pts, 100, 7), E.bench_queries(pts, 100, 8))


def test_latency_bench_single_point_modes_agree():
    pts = field.ScoredPointSet([[6.4e6, 0.0, 0.0]], [0.9])
    idx = pts.build_index(1)
    p = field.AdfParams()
    ivf = E.latency_bench(pts, p, "ivf", 100, seed=1, idx=idx)
    brute = E.latency_bench(pts, p, "brute", 100, seed=1)
    assert ivf.checksum == brute.checksum
    assert ivf.ms_per_query > 0 and brute.ms_per_query > 0 and ivf.n_queries == 100


def test_latency_bench_validation():
    pts = synth.scored_points(200, seed=0)
    with pytest.raises(ValueError):
        E.latency_bench(pts, field.AdfParams(), "brute", 99)
    with pytest.raises(ValueError):
        E.latency_bench(pts, field.AdfParams(), "ivf", 100)
    with pytest.raises(ValueError):
        E.latency_bench(pts, field.AdfParams(), "faiss", 100)
