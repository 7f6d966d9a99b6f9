import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dnlpos.fingerprints import WapIndex, build_wap_index
from dnlpos.neighborhood import (
    InsufficientCandidatesError,
    knn_predict,
    manhattan_distance,
    select_neighbors,
    wknn_predict,
)

from conftest import fp, random_fingerprints


def brute_distance(a, b, index):
    # Dict-based, no vectors: unknown MACs are ignored, missing ones count as 0.
    return sum(abs(a.observations.get(m, 0.0) - b.observations.get(m, 0.0)) for m in index.mac_to_idx)


def brute_neighbors(target, cands, k, index):
    scored = sorted(((brute_distance(target, c, index), c.fp_id, c) for c in cands), key=lambda t: (t[0], t[1]))
    return scored[:k]


def test_manhattan_examples():
    assert manhattan_distance([-50, -60, 0], [-55, 0, 0]) == 65
    assert manhattan_distance([-50, -60], [-50, -60]) == 0
    assert manhattan_distance([0, 0], [0, 0]) == 0
    with pytest.raises(ValueError):
        manhattan_distance([1, 2], [1, 2, 3])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-100, 0), st.floats(-100, 0), st.floats(-100, 0)), min_size=1, max_size=12))
def test_manhattan_metric_axioms(rows):
    a, b, c = (np.array(col) for col in zip(*rows))
    assert manhattan_distance(a, b) == manhattan_distance(b, a)
    assert manhattan_distance(a, c) <= manhattan_distance(a, b) + manhattan_distance(b, c) + 1e-9


def _line_candidates(dists):
    # One WAP: RSS offsets from the target's -50 give the requested distances.
    return [fp(i + 1, {"w": -50.0 - d}, pos=(float(i), 0.0)) for i, d in enumerate(dists)]


def test_select_neighbors_sorted():
    target = fp(100, {"w": -50.0})
    idx = WapIndex({"w": 1})
    com = select_neighbors(target, _line_candidates([10, 5, 20]), 2, idx)
    assert com.distances.tolist() == [5, 10]
    com = select_neighbors(target, _line_candidates([10, 5, 20]), 3, idx)
    assert com.distances.tolist() == [5, 10, 20]


def test_select_neighbors_tie_by_fp_id():
    target = fp(100, {"w": -50.0})
    cands = [fp(9, {"w": -57.0}), fp(4, {"w": -43.0})]
    com = select_neighbors(target, cands, 1, WapIndex({"w": 1}))
    assert com.neighbors[0][0].fp_id == 4


def test_select_neighbors_errors():
    target = fp(100, {"w": -50.0})
    idx = WapIndex({"w": 1})
    with pytest.raises(InsufficientCandidatesError) as exc:
        select_neighbors(target, _line_candidates([1, 2]), 3, idx)
    assert exc.value.n_candidates == 2
    with pytest.raises(ValueError):
        select_neighbors(target, [fp(100, {"w": -50.0})], 1, idx)


def test_select_neighbors_matches_brute_force(rng):
    for _ in range(50):
        n = int(rng.integers(2, 200))
        fps = random_fingerprints(rng, n + 1, int(rng.integers(1, 30)))
        target, cands = fps[0], fps[1:]
        idx = build_wap_index(cands)
        k = int(rng.integers(1, n + 1))
        com = select_neighbors(target, cands, k, idx)
        expected = brute_neighbors(target, cands, k, idx)
        assert [c.fp_id for c, _ in com.neighbors] == [t[1] for t in expected]
        assert np.allclose(com.distances, [t[0] for t in expected], rtol=0, atol=1e-9)
        assert target.fp_id not in [c.fp_id for c, _ in com.neighbors]


def test_knn_examples():
    target = fp(100, {"w": -50.0})
    idx = WapIndex({"w": 1})
    cands = [fp(1, {"w": -51.0}, (0, 0)), fp(2, {"w": -52.0}, (2, 4)), fp(3, {"w": -90.0}, (50, 50))]
    assert knn_predict(target, cands, 2, idx).tolist() == [1, 2]
    assert knn_predict(target, cands, 1, idx).tolist() == [0, 0]


def test_wknn_examples():
    target = fp(100, {"w": -50.0})
    idx = WapIndex({"w": 1})
    cands = [fp(1, {"w": -51.0}, (0, 0)), fp(2, {"w": -53.0}, (4, 0))]
    assert np.allclose(wknn_predict(target, cands, 2, idx), [1.0, 0.0], atol=1e-15)
    exact = [fp(1, {"w": -50.0}, (5, 5)), fp(2, {"w": -53.0}, (4, 0)), fp(3, {"w": -55.0}, (9, 9))]
    assert wknn_predict(target, exact, 3, idx).tolist() == [5, 5]


def test_wknn_equidistant_equals_knn(rng):
    target = fp(100, {"w": -50.0})
    idx = WapIndex({"w": 1})
    cands = [fp(i + 1, {"w": -50.0 + (3 if i % 2 else -3)}, tuple(rng.uniform(0, 50, 2))) for i in range(10)]
    diff = wknn_predict(target, cands, 10, idx) - knn_predict(target, cands, 10, idx)
    assert np.all(np.abs(diff) < 1e-12)


def test_predictions_inside_neighbor_bbox(rng):
    for _ in range(30):
        fps = random_fingerprints(rng, 40, 10, integer_rss=False)
        idx = build_wap_index(fps[1:])
        com = select_neighbors(fps[0], fps[1:], 10, idx)
        pos = np.array([c.position for c, _ in com.neighbors])
        for p in (knn_predict(fps[0], fps[1:], 10, idx), wknn_predict(fps[0], fps[1:], 10, idx)):
            assert np.all(p >= pos.min(axis=0) - 1e-9) and np.all(p <= pos.max(axis=0) + 1e-9)
