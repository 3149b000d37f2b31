# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled neighbor-search kernels.

Two exact search structures share one distance routine: a kd-tree with
tight bounding boxes (low dimension) and a linear scan with early exit
(high dimension). Keys are the max-norm distance or the squared Euclidean
distance accumulated in dimension order; ordering is lexicographic on
(key, point id), so results are identical to a naive scan.
"""

from cython.parallel cimport prange, parallel
from libc.math cimport fabs, sqrt, sin, cos
from libc.stdlib cimport malloc, free

import numpy as np

ctypedef Py_ssize_t isize

cdef enum:
    MAXNORM = 0
    EUCLID = 1


cdef inline double _key(const double* a, const double* b, isize d,
                        int metric, double bound) noexcept nogil:
    # Returns early (with a value > bound) once the partial key exceeds bound.
    cdef double s = 0.0
    cdef double t
    cdef isize j
    cdef double t1, t2, t3
    if metric == MAXNORM:
        j = 0
        # branch-free blocks of four; the bound is only checked between blocks
        while j + 4 <= d:
            t = fabs(a[j] - b[j])
            t1 = fabs(a[j + 1] - b[j + 1])
            t2 = fabs(a[j + 2] - b[j + 2])
            t3 = fabs(a[j + 3] - b[j + 3])
            t = t1 if t1 > t else t
            t2 = t3 if t3 > t2 else t2
            t = t2 if t2 > t else t
            s = t if t > s else s
            if s > bound:
                return s
            j += 4
        while j < d:
            t = fabs(a[j] - b[j])
            s = t if t > s else s
            j += 1
        return s
    else:
        for j in range(d):
            t = a[j] - b[j]
            s = s + t * t
            if s > bound:
                return s
    return s


cdef inline bint _less(double ka, isize ia, double kb, isize ib) noexcept nogil:
    return ka < kb or (ka == kb and ia < ib)


cdef inline void _sift_down(double* hk, isize* hi, isize n, isize pos) noexcept nogil:
    # Max-heap on (key, id).
    cdef isize child
    cdef double tk
    cdef isize ti
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        if child + 1 < n and _less(hk[child], hi[child], hk[child + 1], hi[child + 1]):
            child += 1
        if _less(hk[pos], hi[pos], hk[child], hi[child]):
            tk = hk[pos]; hk[pos] = hk[child]; hk[child] = tk
            ti = hi[pos]; hi[pos] = hi[child]; hi[child] = ti
            pos = child
        else:
            break


cdef inline void _sift_up(double* hk, isize* hi, isize pos) noexcept nogil:
    cdef isize parent
    cdef double tk
    cdef isize ti
    while pos > 0:
        parent = (pos - 1) // 2
        if _less(hk[parent], hi[parent], hk[pos], hi[pos]):
            tk = hk[pos]; hk[pos] = hk[parent]; hk[parent] = tk
            ti = hi[pos]; hi[pos] = hi[parent]; hi[parent] = ti
            pos = parent
        else:
            break


cdef inline void _heap_offer(double* hk, isize* hi, isize* count, isize k,
                             double key, isize idx) noexcept nogil:
    if count[0] < k:
        hk[count[0]] = key
        hi[count[0]] = idx
        _sift_up(hk, hi, count[0])
        count[0] += 1
    elif _less(key, idx, hk[0], hi[0]):
        hk[0] = key
        hi[0] = idx
        _sift_down(hk, hi, k, 0)


cdef inline void _heap_drain(double* hk, isize* hi, isize k, double* out_d,
                             long long* out_i, int metric) noexcept nogil:
    # Pops into ascending order.
    cdef isize n = k
    cdef double tk
    cdef isize ti
    while n > 0:
        n -= 1
        out_d[n] = sqrt(hk[0]) if metric == EUCLID else hk[0]
        out_i[n] = hi[0]
        hk[0] = hk[n]
        hi[0] = hi[n]
        _sift_down(hk, hi, n, 0)


cdef inline double _to_dist(double key, int metric) noexcept nogil:
    return sqrt(key) if metric == EUCLID else key


# ---------------------------------------------------------------- brute force

DEF TILE = 16


def brute_knn(const double[:, ::1] data, const long long[::1] queries,
              isize k, int metric, bint exclude_self):
    """k nearest points for each query id by a full scan.

    Queries are processed in tiles so each reference row is loaded once per
    tile. Returns ``(dist, ids)`` arrays of shape ``(len(queries), k)``
    sorted by (distance, id).
    """
    cdef isize n = data.shape[0], d = data.shape[1], nq = queries.shape[0]
    dist_arr = np.empty((nq, k), dtype=np.float64)
    ids_arr = np.empty((nq, k), dtype=np.int64)
    cdef double[:, ::1] dist = dist_arr
    cdef long long[:, ::1] ids = ids_arr
    cdef isize ntiles = (nq + TILE - 1) // TILE
    cdef isize tile, t0, tn, tq, j, q
    cdef double key, worst
    cdef double* hk
    cdef isize* hi
    cdef isize* count
    if nq == 0:
        return dist_arr, ids_arr
    with nogil, parallel():
        hk = <double*> malloc(TILE * k * sizeof(double))
        hi = <isize*> malloc(TILE * k * sizeof(isize))
        count = <isize*> malloc(TILE * sizeof(isize))
        for tile in prange(ntiles, schedule='dynamic'):
            t0 = tile * TILE
            tn = nq - t0
            if tn > TILE:
                tn = TILE
            for tq in range(tn):
                count[tq] = 0
            for j in range(n):
                for tq in range(tn):
                    q = queries[t0 + tq]
                    if exclude_self and j == q:
                        continue
                    if count[tq] < k:
                        key = _key(&data[q, 0], &data[j, 0], d, metric, 1e308)
                    else:
                        worst = hk[tq * k]
                        key = _key(&data[q, 0], &data[j, 0], d, metric, worst)
                        # Ids arrive ascending, so an equal key never displaces.
                        if key >= worst:
                            continue
                    _heap_offer(hk + tq * k, hi + tq * k, &count[tq], k, key, j)
            for tq in range(tn):
                _heap_drain(hk + tq * k, hi + tq * k, k, &dist[t0 + tq, 0],
                            &ids[t0 + tq, 0], metric)
        free(hk)
        free(hi)
        free(count)
    return dist_arr, ids_arr


def brute_count(const double[:, ::1] data, const long long[::1] queries,
                const double[::1] radii, int metric, bint strict, bint exclude_self):
    """Number of points within ``radii[i]`` of each query id by a full scan."""
    cdef isize n = data.shape[0], d = data.shape[1], nq = queries.shape[0]
    out_arr = np.zeros(nq, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef isize qi, j, q, c
    cdef double r, bound, dd
    for qi in prange(nq, nogil=True, schedule='dynamic'):
        q = queries[qi]
        r = radii[qi]
        bound = r * r * 1.0000001 + 1e-300 if metric == EUCLID else r
        c = 0
        for j in range(n):
            dd = _key(&data[q, 0], &data[j, 0], d, metric, bound)
            if dd > bound:
                continue
            dd = _to_dist(dd, metric)
            if (strict and dd < r) or ((not strict) and dd <= r):
                c = c + 1
        if exclude_self and ((strict and 0.0 < r) or ((not strict) and 0.0 <= r)):
            c = c - 1
        out[qi] = c
    return out_arr


# -------------------------------------------------------------------- kd-tree

cdef struct Tree:
    const double* pts      # permuted copy, row-major n x d
    const long long* perm  # perm[t] = original id of row t
    const long long* start
    const long long* end
    const long long* left
    const long long* right
    const double* lo       # node bounding boxes, n_nodes x d
    const double* hi
    isize d
    int metric


cdef inline double _node_lower(const Tree* t, isize node, const double* q) noexcept nogil:
    cdef const double* lo = t.lo + node * t.d
    cdef const double* hi = t.hi + node * t.d
    cdef double s = 0.0, diff
    cdef isize j
    for j in range(t.d):
        if q[j] < lo[j]:
            diff = lo[j] - q[j]
        elif q[j] > hi[j]:
            diff = q[j] - hi[j]
        else:
            diff = 0.0
        if t.metric == MAXNORM:
            if diff > s:
                s = diff
        else:
            s = s + diff * diff
    return s


cdef inline double _node_upper(const Tree* t, isize node, const double* q) noexcept nogil:
    cdef const double* lo = t.lo + node * t.d
    cdef const double* hi = t.hi + node * t.d
    cdef double s = 0.0, a, b
    cdef isize j
    for j in range(t.d):
        a = fabs(q[j] - lo[j])
        b = fabs(hi[j] - q[j])
        if b > a:
            a = b
        if t.metric == MAXNORM:
            if a > s:
                s = a
        else:
            s = s + a * a
    return s


cdef void _tree_knn(const Tree* t, isize node, double lower, const double* q,
                    isize qid, bint exclude_self, double* hk, isize* hi,
                    isize* count, isize k) noexcept nogil:
    cdef isize r, idx, a, b
    cdef double key, la, lb
    if count[0] == k and lower > hk[0]:
        return
    if t.left[node] < 0:
        for r in range(t.start[node], t.end[node]):
            idx = t.perm[r]
            if exclude_self and idx == qid:
                continue
            if count[0] < k:
                key = _key(q, t.pts + r * t.d, t.d, t.metric, 1e308)
            else:
                key = _key(q, t.pts + r * t.d, t.d, t.metric, hk[0])
                if key > hk[0]:
                    continue
            _heap_offer(hk, hi, count, k, key, idx)
        return
    a = t.left[node]
    b = t.right[node]
    la = _node_lower(t, a, q)
    lb = _node_lower(t, b, q)
    if lb < la:
        a, b = b, a
        la, lb = lb, la
    _tree_knn(t, a, la, q, qid, exclude_self, hk, hi, count, k)
    _tree_knn(t, b, lb, q, qid, exclude_self, hk, hi, count, k)


cdef isize _tree_count(const Tree* t, isize node, const double* q, double r,
                       bint strict) noexcept nogil:
    cdef double lo_d = _to_dist(_node_lower(t, node, q), t.metric)
    cdef double hi_d
    cdef isize c = 0, row
    cdef double dd
    if (strict and lo_d >= r) or ((not strict) and lo_d > r):
        return 0
    hi_d = _to_dist(_node_upper(t, node, q), t.metric)
    if (strict and hi_d < r) or ((not strict) and hi_d <= r):
        return t.end[node] - t.start[node]
    if t.left[node] < 0:
        for row in range(t.start[node], t.end[node]):
            dd = _to_dist(_key(q, t.pts + row * t.d, t.d, t.metric, 1e308), t.metric)
            if (strict and dd < r) or ((not strict) and dd <= r):
                c += 1
        return c
    return (_tree_count(t, t.left[node], q, r, strict)
            + _tree_count(t, t.right[node], q, r, strict))


cdef inline bint _row_less(const double[:, ::1] data, long long a, long long b,
                           isize dim) noexcept nogil:
    return data[a, dim] < data[b, dim] or (data[a, dim] == data[b, dim] and a < b)


cdef void _select(const double[:, ::1] data, long long* perm, isize lo, isize hi,
                  isize kth, isize dim) noexcept nogil:
    # In-place quickselect of perm[lo:hi] on (coordinate, id).
    cdef isize i, j, mid
    cdef long long pivot, tmp
    hi -= 1
    while lo < hi:
        mid = lo + (hi - lo) // 2
        # median of three into perm[mid]
        if _row_less(data, perm[mid], perm[lo], dim):
            tmp = perm[mid]; perm[mid] = perm[lo]; perm[lo] = tmp
        if _row_less(data, perm[hi], perm[lo], dim):
            tmp = perm[hi]; perm[hi] = perm[lo]; perm[lo] = tmp
        if _row_less(data, perm[hi], perm[mid], dim):
            tmp = perm[hi]; perm[hi] = perm[mid]; perm[mid] = tmp
        pivot = perm[mid]
        i = lo
        j = hi
        while i <= j:
            while _row_less(data, perm[i], pivot, dim):
                i += 1
            while _row_less(data, pivot, perm[j], dim):
                j -= 1
            if i <= j:
                tmp = perm[i]; perm[i] = perm[j]; perm[j] = tmp
                i += 1
                j -= 1
        if kth <= j:
            hi = j
        elif kth >= i:
            lo = i
        else:
            return


cdef class KDTree:
    """Exact kd-tree over an ``(n, d)`` float64 array.

    Nodes are split at the median of their widest bounding-box side; leaf
    scans run over a permuted, contiguous copy of the points.
    """
    cdef readonly object points
    cdef readonly isize n, d, leafsize, n_nodes
    cdef object _pts, _perm, _start, _end, _left, _right, _lo, _hi
    cdef Tree _t

    def __init__(self, data, isize leafsize=16):
        cdef const double[:, ::1] x = np.ascontiguousarray(data, dtype=np.float64)
        self.points = np.asarray(x)
        self.n = x.shape[0]
        self.d = x.shape[1]
        self.leafsize = max(1, leafsize)
        cap = 2 * (self.n // self.leafsize + 1) * 2 + 1
        self._perm = np.arange(self.n, dtype=np.int64)
        self._start = np.zeros(cap, dtype=np.int64)
        self._end = np.zeros(cap, dtype=np.int64)
        self._left = np.full(cap, -1, dtype=np.int64)
        self._right = np.full(cap, -1, dtype=np.int64)
        self._lo = np.zeros((cap, self.d), dtype=np.float64)
        self._hi = np.zeros((cap, self.d), dtype=np.float64)
        self.n_nodes = 0
        self._build(x)
        self._pts = np.ascontiguousarray(self.points[self._perm])
        self._bind()

    cdef void _bind(self):
        cdef const double[:, ::1] pts = self._pts
        cdef const long long[::1] perm = self._perm
        cdef const long long[::1] st = self._start
        cdef const long long[::1] en = self._end
        cdef const long long[::1] le = self._left
        cdef const long long[::1] ri = self._right
        cdef const double[:, ::1] lo = self._lo
        cdef const double[:, ::1] hi = self._hi
        self._t.pts = &pts[0, 0] if self.n > 0 else NULL
        self._t.perm = &perm[0]
        self._t.start = &st[0]
        self._t.end = &en[0]
        self._t.left = &le[0]
        self._t.right = &ri[0]
        self._t.lo = &lo[0, 0]
        self._t.hi = &hi[0, 0]
        self._t.d = self.d

    cdef void _build(self, const double[:, ::1] x):
        cdef long long[::1] perm = self._perm
        cdef long long[::1] st = self._start
        cdef long long[::1] en = self._end
        cdef long long[::1] le = self._left
        cdef long long[::1] ri = self._right
        cdef double[:, ::1] lo = self._lo
        cdef double[:, ::1] hi = self._hi
        cdef isize node, s, e, r, j, dim, mid
        cdef double spread, best, v
        self.n_nodes = 0
        # Nodes are created breadth-first from an explicit work list so the
        # node numbering is deterministic; children are linked by index.
        work = []
        node = self.n_nodes
        self.n_nodes += 1
        work.append((node, 0, self.n))
        while work:
            node, s, e = work.pop()
            st[node] = s
            en[node] = e
            for j in range(self.d):
                lo[node, j] = x[perm[s], j]
                hi[node, j] = x[perm[s], j]
            for r in range(s + 1, e):
                for j in range(self.d):
                    v = x[perm[r], j]
                    if v < lo[node, j]:
                        lo[node, j] = v
                    elif v > hi[node, j]:
                        hi[node, j] = v
            if e - s <= self.leafsize:
                continue
            dim = 0
            best = -1.0
            for j in range(self.d):
                spread = hi[node, j] - lo[node, j]
                if spread > best:
                    best = spread
                    dim = j
            if best <= 0.0:
                continue  # all points identical: keep as leaf
            mid = s + (e - s) // 2
            with nogil:
                _select(x, &perm[0], s, e, mid, dim)
            le[node] = self.n_nodes
            ri[node] = self.n_nodes + 1
            self.n_nodes += 2
            work.append((le[node], s, mid))
            work.append((ri[node], mid, e))

    def knn(self, const long long[::1] queries, isize k, int metric, bint exclude_self):
        """k nearest points for each in-sample query id, sorted by (distance, id)."""
        cdef isize nq = queries.shape[0]
        dist_arr = np.empty((nq, k), dtype=np.float64)
        ids_arr = np.empty((nq, k), dtype=np.int64)
        cdef double[:, ::1] dist = dist_arr
        cdef long long[:, ::1] ids = ids_arr
        cdef const double[:, ::1] x = self.points
        cdef Tree t = self._t
        cdef isize qi, q, count
        cdef double* hk
        cdef isize* hi
        t.metric = metric
        if nq == 0:
            return dist_arr, ids_arr
        with nogil, parallel():
            hk = <double*> malloc(k * sizeof(double))
            hi = <isize*> malloc(k * sizeof(isize))
            for qi in prange(nq, schedule='dynamic'):
                q = queries[qi]
                count = 0
                _tree_knn(&t, 0, _node_lower(&t, 0, &x[q, 0]), &x[q, 0], q,
                          exclude_self, hk, hi, &count, k)
                _heap_drain(hk, hi, k, &dist[qi, 0], &ids[qi, 0], metric)
            free(hk)
            free(hi)
        return dist_arr, ids_arr

    def count(self, const long long[::1] queries, const double[::1] radii,
              int metric, bint strict, bint exclude_self):
        """Number of points within ``radii[i]`` of each in-sample query id."""
        cdef isize nq = queries.shape[0]
        out_arr = np.zeros(nq, dtype=np.int64)
        cdef long long[::1] out = out_arr
        cdef const double[:, ::1] x = self.points
        cdef Tree t = self._t
        cdef isize qi, q, c
        cdef double r
        t.metric = metric
        for qi in prange(nq, nogil=True, schedule='dynamic'):
            q = queries[qi]
            r = radii[qi]
            c = _tree_count(&t, 0, &x[q, 0], r, strict)
            if exclude_self and ((strict and 0.0 < r) or ((not strict) and 0.0 <= r)):
                c = c - 1
            out[qi] = c
        return out_arr


# ------------------------------------------------------------------- fiber op

cdef extern from *:
    """
    #define _GNU_SOURCE 1
    #include <math.h>
    static inline void _sincos(double x, double *s, double *c) {
    #if defined(__GLIBC__)
        sincos(x, s, c);
    #else
        *s = sin(x); *c = cos(x);
    #endif
    }
    """
    void _sincos(double x, double* s, double* c) nogil


def kerr_phase(double complex[::1] u, double coef):
    """In place: ``u *= exp(1j * coef * |u|**2)``."""
    cdef isize i, n = u.shape[0]
    cdef double re, im, ph, c, s
    with nogil:
        for i in range(n):
            re = u[i].real
            im = u[i].imag
            ph = coef * (re * re + im * im)
            _sincos(ph, &s, &c)
            u[i].real = re * c - im * s
            u[i].imag = re * s + im * c
