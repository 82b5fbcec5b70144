import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crashrules.cluster import (
    ElbowCurve,
    kmeans_fit,
    knee_distances,
    lloyd_step,
    run_lloyd,
    select_elbow,
    wcss_sweep,
)
from crashrules.synthetic import make_blobs
from oracles import best_two_partition, chord_knee, partition_wcss

HAND_CURVE = [(2, 100.0), (3, 40.0), (4, 15.0), (5, 12.0), (6, 11.0)]


def test_four_point_example():
    pts = np.array([[0.0], [1.0], [10.0], [11.0]])
    model = kmeans_fit(pts, 2, seed=0)
    assert model.wcss == pytest.approx(1.0, abs=1e-12)
    assert sorted(model.centroids[:, 0].tolist()) == [0.5, 10.5]
    assert best_two_partition(pts)[0] == pytest.approx(1.0, abs=1e-12)
    assert model.assignments[0] == model.assignments[1] != model.assignments[2] == model.assignments[3]


def test_k_equals_n_and_one():
    pts = np.array([[0.0, 1.0], [2.0, 5.0], [4.0, 0.0]])
    full = kmeans_fit(pts, 3, seed=1)
    assert full.wcss == 0.0
    assert sorted(map(tuple, full.centroids.tolist())) == sorted(map(tuple, pts.tolist()))
    one = kmeans_fit(pts, 1, seed=1)
    assert np.allclose(one.centroids[0], pts.mean(axis=0))
    assert one.wcss == pytest.approx(((pts - pts.mean(axis=0)) ** 2).sum())


def test_fixed_point():
    a, c, w = lloyd_step([[0.0], [10.0]], [[0.0], [10.0]])
    assert a.tolist() == [0, 1] and c[:, 0].tolist() == [0.0, 10.0] and w == 0.0


def test_tie_goes_to_lowest_index():
    a, _, _ = lloyd_step([[1.0]], [[0.0], [2.0]])
    assert a.tolist() == [0]
    a, _, _ = lloyd_step([[1.0]], [[2.0], [0.0]])
    assert a.tolist() == [0]


def test_empty_cluster_reseeded():
    pts = np.array([[0.0], [0.5], [1.0], [3.0]])
    a, c, w = lloyd_step(pts, [[0.0], [100.0]])
    assert sorted(np.bincount(a, minlength=2).tolist()) == [1, 3]
    assert a[3] == 1 and c[1, 0] == 3.0
    assert c[0, 0] == pytest.approx(0.5)
    assert w == pytest.approx(partition_wcss(pts, a))


def test_errors():
    with pytest.raises(ValueError, match="exceeds"):
        kmeans_fit(np.zeros((3, 1)), 4)
    with pytest.raises(ValueError, match="empty"):
        kmeans_fit(np.zeros((0, 2)), 1)
    with pytest.raises(ValueError):
        kmeans_fit(np.zeros((3, 1)), 0)
    with pytest.raises(ValueError):
        kmeans_fit(np.zeros((3, 1)), 1, max_iter=0)
    with pytest.raises(ValueError, match="dimension"):
        lloyd_step(np.zeros((3, 2)), np.zeros((2, 3)))
    with pytest.raises(ValueError, match="outside"):
        wcss_sweep(np.zeros((3, 1)), range(2, 5))


def test_determinism_and_threads(monkeypatch):
    pts, _ = make_blobs(n=120, centers=3, seed=5)
    a = kmeans_fit(pts, 3, seed=11)
    b = kmeans_fit(pts, 3, seed=11)
    c = kmeans_fit(pts, 3, seed=11, n_jobs=4)
    monkeypatch.setenv("CRASH_RULES_THREADS", "0")
    d = kmeans_fit(pts, 3, seed=11)
    for m in (b, c, d):
        assert np.array_equal(m.assignments, a.assignments)
        assert m.wcss == a.wcss and m.restart == a.restart


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30), st.integers(1, 3), st.integers(1, 5))
def test_model_invariants(seed, n, dim, k):
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, 4, size=(n, dim)).astype(float)
    k = min(k, n)
    model = kmeans_fit(pts, k, seed=seed, restarts=3)
    # history never rises
    assert all(b <= a for a, b in zip(model.history, model.history[1:]))
    assert model.wcss == pytest.approx(partition_wcss(pts, model.assignments), abs=1e-9)
    d2 = ((pts[:, None, :] - model.centroids[None]) ** 2).sum(axis=2)
    own = d2[np.arange(n), model.assignments]
    assert (own <= d2.min(axis=1)).all()
    distinct = len({tuple(p) for p in pts.tolist()})
    if distinct >= k:
        assert min(model.sizes) >= 1
        # ties to the lowest index; with fewer distinct points than k,
        # keeping clusters non-empty takes precedence over the tie rule
        assert np.array_equal(model.assignments, np.argmin(d2, axis=1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 8))
def test_two_means_reaches_global_optimum(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 2))
    best = min(
        run_lloyd(pts, pts[[i, j]]).wcss
        for i in range(n) for j in range(n) if i != j
    )
    assert best == pytest.approx(best_two_partition(pts)[0], abs=1e-9)


def test_elbow_examples():
    assert select_elbow(HAND_CURVE) == 4
    assert select_elbow([(2, 10.0), (3, 1.0), (4, 0.9), (5, 0.8)]) == 3
    assert select_elbow([(k, 100.0 - 10 * k) for k in range(2, 11)]) == 2
    with pytest.raises(ValueError):
        select_elbow([(2, 1.0), (3, 0.5)])


def test_knee_distances_match_oracle():
    assert knee_distances(HAND_CURVE) == pytest.approx(chord_knee(HAND_CURVE), abs=1e-12)
    d = chord_knee(HAND_CURVE)
    assert max(range(5), key=d.__getitem__) == 2


@given(st.lists(st.floats(0.0, 1e6, allow_nan=False), min_size=3, max_size=9, unique=True),
       st.floats(1e-3, 1e3))
def test_elbow_scale_invariant(ws, factor):
    ws = sorted(ws, reverse=True)
    curve = [(k + 2, w) for k, w in enumerate(ws)]
    scaled = [(k, w * factor) for k, w in curve]
    d, ds = knee_distances(curve), knee_distances(scaled)
    assert ds == pytest.approx(d, abs=1e-9)
    top = max(d)
    # the argmax is stable unless a near-tie sits within float noise
    if sorted(d)[-2] < top - 1e-9:
        assert select_elbow(curve) == select_elbow(scaled)


def test_identical_points_sweep():
    curve = wcss_sweep(np.ones((12, 2)), range(2, 6), seed=0, restarts=2)
    assert [w for _, w in curve.points] == [0.0] * 4
    assert curve.chosen_k == 2


def test_sweep_monotone_on_blobs(tmp_path):
    pts, _ = make_blobs(n=200, centers=4, seed=2)
    curve = wcss_sweep(pts, seed=3)
    ws = [w for _, w in curve.points]
    assert [k for k, _ in curve.points] == list(range(2, 11))
    assert all(b <= a * (1 + 1e-9) for a, b in zip(ws, ws[1:]))
    assert curve.chosen_k == 4
    curve.to_csv(tmp_path / "elbow.csv")
    lines = (tmp_path / "elbow.csv").read_text().splitlines()
    assert lines[0] == "k,wcss" and len(lines) == 10
    assert isinstance(curve, ElbowCurve) and curve.models[4].k == 4
