import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fibermi import index as index_mod
from fibermi.index import NeighborIndex, choose_structure
from fibermi.numerics import Metric, SampleSet

from oracles import naive_count, naive_knn

BACKENDS = ["numpy"] + (["compiled"] if index_mod._kernels is not None else [])
STRUCTURES = ["kd-tree", "brute-force-blocked"]


@pytest.fixture(params=[(b, s) for b in BACKENDS for s in STRUCTURES], ids=lambda p: f"{p[0]}-{p[1]}")
def make_index(request):
    backend, structure = request.param

    def make(points, metric=Metric.MAXNORM):
        return NeighborIndex(points, metric, structure=structure, backend=backend)

    return make


def line():
    return SampleSet([0.0, 1.0, 3.0])


def test_build_small(make_index):
    assert make_index(line()).n == 3


def test_build_needs_two_points():
    with pytest.raises(ValueError):
        NeighborIndex(SampleSet([1.0]))


def test_kth_distance_examples(make_index):
    idx = make_index(line())
    assert [idx.kth_distance(i, 1).kth_distance for i in range(3)] == [1, 1, 2]
    assert idx.kth_distance(0, 2).kth_distance == 3


def test_kth_distance_k_out_of_range(make_index):
    idx = make_index(line())
    with pytest.raises(ValueError):
        idx.kth_distance(0, 3)
    with pytest.raises(ValueError):
        idx.kth_distance(0, 0)


def test_range_count_examples(make_index):
    idx = make_index(line())
    assert idx.range_count(1, 1.5, "strict", True) == 1
    for i in range(3):
        assert idx.range_count(i, 0.0, "strict") == 0
    assert idx.range_count(1, 2.0, "strict") == 1
    assert idx.range_count(1, 2.0, "inclusive") == 2
    assert idx.range_count(1, 0.0, "inclusive", exclude_self=False) == 1


def test_knn_ids_examples(make_index):
    idx = make_index(line())
    assert idx.knn_ids(2, 2) == [1, 0]


def test_equidistant_tie_lower_id_first(make_index):
    idx = make_index(SampleSet([5.0, 4.0, 6.0, 3.0, 7.0]))
    assert idx.knn_ids(0, 2) == [1, 2]
    assert idx.knn_ids(0, 4) == [1, 2, 3, 4]


def test_duplicates_give_zero_distance(make_index):
    idx = make_index(SampleSet([1.0, 1.0, 1.0, 2.0]))
    assert idx.kth_distance(0, 2).kth_distance == 0
    assert idx.knn_ids(2, 2) == [0, 1]


def test_rejects_negative_radius():
    with pytest.raises(ValueError):
        NeighborIndex(line()).range_count(0, -1.0)


def _random_points(rng, n, d, ties):
    x = rng.standard_normal((n, d))
    if ties:
        x = np.round(x, 1)
    return x


@pytest.mark.parametrize("metric", list(Metric))
@pytest.mark.parametrize("d", [1, 2, 3, 8, 44])
def test_oracle_equivalence(make_index, metric, d):
    rng = np.random.default_rng(d)
    for ties in (False, True):
        x = _random_points(rng, 500, d, ties and d <= 2)
        idx = make_index(x, metric)
        k = 6
        dist, ids = idx.knn(k)
        ref = naive_knn(x, k, metric)
        np.testing.assert_array_equal(ids, ref[1])
        np.testing.assert_array_equal(dist, ref[0])
        radii = dist[:, 2] * rng.uniform(0.5, 1.5, len(x))
        radii[::7] = dist[::7, 2]  # exact boundary hits
        for boundary in ("strict", "inclusive"):
            np.testing.assert_array_equal(idx.range_counts(radii, boundary=boundary),
                                          naive_count(x, radii, metric, boundary))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 300), d=st.sampled_from([1, 2, 4, 8]),
       k=st.integers(1, 10))
def test_monotonicity_and_consistency(seed, n, d, k):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    k = min(k, n - 1)
    idx = NeighborIndex(x)
    dist, _ = idx.knn(k)
    assert np.all(np.diff(dist, axis=1) >= 0)
    r = dist[:, -1]
    assert np.all(idx.range_counts(r, boundary="strict") <= k - 1)
    assert np.all(idx.range_counts(r, boundary="inclusive") >= k)
    assert np.all(idx.range_counts(r * 1.5) >= idx.range_counts(r))


def test_permutation_invariance():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((400, 3))
    perm = rng.permutation(len(x))
    a = NeighborIndex(x)
    b = NeighborIndex(x[perm])
    da, ia = a.knn(5)
    db, ib = b.knn(5)
    inv = np.argsort(perm)
    np.testing.assert_array_equal(db[inv], da)
    np.testing.assert_array_equal(np.sort(perm[ib[inv]], axis=1), np.sort(ia, axis=1))
    r = da[:, -1]
    np.testing.assert_array_equal(b.range_counts(r[perm]), a.range_counts(r)[perm])


def test_structure_heuristic():
    assert choose_structure(2**18, 4) == "kd-tree"
    assert choose_structure(2**18, 44) == "brute-force-blocked"
    idx = NeighborIndex(np.random.default_rng(0).standard_normal((1000, 44)))
    assert idx.structure == "brute-force-blocked"


def test_backends_agree_on_large_instance():
    if "compiled" not in BACKENDS:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(9)
    x = rng.standard_normal((3000, 4))
    q = np.arange(0, 3000, 11)
    a = NeighborIndex(x, backend="compiled").knn(8, q)
    b = NeighborIndex(x, backend="numpy").knn(8, q)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_build_is_deterministic():
    x = np.random.default_rng(2).standard_normal((2000, 3))
    a = NeighborIndex(x).knn(4)
    b = NeighborIndex(x).knn(4)
    np.testing.assert_array_equal(a[1], b[1])
