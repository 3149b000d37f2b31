"""Pure-numpy versions of the compiled neighbor kernels.

Same signatures as :mod:`fibermi._kernels` and bit-identical neighbor
results. Used when the extension is not built or ``FIBERMI_PURE=1`` is set.
Everything is a blocked full scan, so cost is O(N^2 d) whatever structure
the index asked for.
"""

import numpy as np

MAXNORM = 0
EUCLID = 1

_BLOCK_ELEMS = 1 << 22


def _keys(data, queries, metric):
    q = data[queries]
    out = np.zeros((len(queries), data.shape[0]))
    tmp = np.empty_like(out)
    for j in range(data.shape[1]):
        np.subtract(data[None, :, j], q[:, j, None], out=tmp)
        if metric == MAXNORM:
            np.abs(tmp, out=tmp)
            np.maximum(out, tmp, out=out)
        else:
            np.multiply(tmp, tmp, out=tmp)
            np.add(out, tmp, out=out)
    return out


def _chunks(nq, n):
    step = max(1, _BLOCK_ELEMS // max(n, 1))
    for s in range(0, nq, step):
        yield s, min(nq, s + step)


def brute_knn(data, queries, k, metric, exclude_self):
    data = np.ascontiguousarray(data, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.int64)
    nq = len(queries)
    dist = np.empty((nq, k))
    ids = np.empty((nq, k), dtype=np.int64)
    for s, e in _chunks(nq, data.shape[0]):
        qs = queries[s:e]
        keys = _keys(data, qs, metric)
        if exclude_self:
            keys[np.arange(e - s), qs] = np.inf
        kth = np.partition(keys, k - 1, axis=1)[:, k - 1]
        mask = keys <= kth[:, None]
        counts = mask.sum(axis=1)
        for r in range(e - s):
            if counts[r] == k:
                cand = np.flatnonzero(mask[r])
            else:
                # boundary ties: keep the lowest ids at the k-th key
                below = np.flatnonzero(keys[r] < kth[r])
                at = np.flatnonzero(keys[r] == kth[r])[: k - len(below)]
                cand = np.concatenate([below, at])
            order = np.lexsort((cand, keys[r, cand]))
            cand = cand[order]
            ids[s + r] = cand
            dist[s + r] = keys[r, cand]
    if metric == EUCLID:
        np.sqrt(dist, out=dist)
    return dist, ids


def brute_count(data, queries, radii, metric, strict, exclude_self):
    data = np.ascontiguousarray(data, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.int64)
    radii = np.asarray(radii, dtype=np.float64)
    out = np.zeros(len(queries), dtype=np.int64)
    for s, e in _chunks(len(queries), data.shape[0]):
        d = _keys(data, queries[s:e], metric)
        if metric == EUCLID:
            np.sqrt(d, out=d)
        r = radii[s:e, None]
        out[s:e] = (d < r).sum(axis=1) if strict else (d <= r).sum(axis=1)
    if exclude_self:
        hit = radii > 0 if strict else radii >= 0
        out -= hit
    return out


def kerr_phase(u, coef):
    u *= np.exp(1j * coef * (u.real * u.real + u.imag * u.imag))
