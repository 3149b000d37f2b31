"""Exact nearest-neighbor index: k-th neighbor distances, neighbor ids, range counts.

The compiled kernels are used when importable; otherwise (or with
``FIBERMI_PURE=1``) a blocked numpy scan gives the same answers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from fibermi import _fallback
from fibermi.numerics import Metric, SampleSet

try:
    if os.environ.get("FIBERMI_PURE"):
        raise ImportError("pure mode requested")
    from fibermi import _kernels
except ImportError:
    _kernels = None

BACKEND = "compiled" if _kernels is not None else "numpy"

STRUCTURES = ("kd-tree", "brute-force-blocked")

# kd-tree pruning collapses past roughly this many dimensions for the sample
# sizes used here; measured with benchmarks/bench_knn.py.
KD_MAX_DIM = 8

_QUERY_CHUNK_ELEMS = 1 << 22


def choose_structure(n: int, d: int) -> str:
    if d <= KD_MAX_DIM and n > 64:
        return "kd-tree"
    return "brute-force-blocked"


@dataclass(frozen=True)
class NeighborResult:
    index: int
    kth_distance: float
    neighbor_ids: tuple


class NeighborIndex:
    """Immutable index over a :class:`SampleSet`.

    Ties in distance are broken by ascending point id. All results equal a
    naive O(N^2) scan exactly.
    """

    def __init__(self, points, metric=Metric.MAXNORM, structure: str | None = None,
                 backend: str | None = None):
        if not isinstance(points, SampleSet):
            points = SampleSet(points)
        if points.n < 2:
            raise ValueError("a neighbor index needs at least 2 points")
        self.points = points
        self.metric = Metric.parse(metric)
        self.structure = structure or choose_structure(points.n, points.d)
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown index structure {self.structure!r}")
        backend = backend or BACKEND
        if backend == "compiled" and _kernels is None:
            raise RuntimeError("compiled kernels are not available")
        if backend not in ("compiled", "numpy"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self._tree = None
        if backend == "compiled" and self.structure == "kd-tree":
            self._tree = _kernels.KDTree(points.data)

    @property
    def n(self) -> int:
        return self.points.n

    def _queries(self, queries):
        if queries is None:
            return np.arange(self.n, dtype=np.int64)
        q = np.ascontiguousarray(np.atleast_1d(queries), dtype=np.int64)
        if q.size and (q.min() < 0 or q.max() >= self.n):
            raise IndexError("query id out of range")
        return q

    def _check_k(self, k, exclude_self):
        limit = self.n - 1 if exclude_self else self.n
        if not 1 <= k <= limit:
            raise ValueError(f"k={k} out of range [1, {limit}]")

    def knn(self, k: int, queries=None, exclude_self: bool = True):
        """``(dist, ids)`` of the k nearest points, rows sorted by (distance, id)."""
        k = int(k)
        self._check_k(k, exclude_self)
        q = self._queries(queries)
        data, code = self.points.data, self.metric.code
        if self._tree is not None:
            return self._tree.knn(q, k, code, exclude_self)
        if self.backend == "compiled":
            return _kernels.brute_knn(data, q, k, code, exclude_self)
        return _fallback.brute_knn(data, q, k, code, exclude_self)

    def kth_distances(self, k: int, queries=None, exclude_self: bool = True) -> np.ndarray:
        q = self._queries(queries)
        out = np.empty(len(q))
        step = max(1, _QUERY_CHUNK_ELEMS // max(int(k), 1))
        for s in range(0, len(q), step):
            dist, _ = self.knn(k, q[s:s + step], exclude_self)
            out[s:s + step] = dist[:, -1]
        return out

    def range_counts(self, radii, queries=None, boundary: str = "strict",
                     exclude_self: bool = True) -> np.ndarray:
        if boundary not in ("strict", "inclusive"):
            raise ValueError(f"boundary must be strict or inclusive, got {boundary!r}")
        q = self._queries(queries)
        r = np.ascontiguousarray(np.broadcast_to(np.asarray(radii, dtype=np.float64), q.shape))
        if np.any(r < 0) or np.any(np.isnan(r)):
            raise ValueError("radius must be >= 0")
        strict = boundary == "strict"
        data, code = self.points.data, self.metric.code
        if self._tree is not None:
            return self._tree.count(q, r, code, strict, exclude_self)
        if self.backend == "compiled":
            return _kernels.brute_count(data, q, r, code, strict, exclude_self)
        return _fallback.brute_count(data, q, r, code, strict, exclude_self)

    # single-query conveniences

    def kth_distance(self, i: int, k: int, exclude_self: bool = True) -> NeighborResult:
        dist, ids = self.knn(k, [i], exclude_self)
        return NeighborResult(int(i), float(dist[0, -1]), tuple(int(v) for v in ids[0]))

    def knn_ids(self, i: int, k: int) -> list:
        _, ids = self.knn(k, [i], True)
        return [int(v) for v in ids[0]]

    def range_count(self, i: int, radius: float, boundary: str = "strict",
                    exclude_self: bool = True) -> int:
        return int(self.range_counts([radius], [i], boundary, exclude_self)[0])


def build(points, metric=Metric.MAXNORM, structure: str | None = None) -> NeighborIndex:
    return NeighborIndex(points, metric, structure)
