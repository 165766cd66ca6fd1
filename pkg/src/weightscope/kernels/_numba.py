import math

import numpy as np
from numba import njit


@njit(cache=True)
def matmul(a, b):
    # i-k-j order; each out[i, j] accumulates over k serially from 0.
    n, m = a.shape
    p = b.shape[1]
    out = np.zeros((n, p))
    for i in range(n):
        for k in range(m):
            aik = a[i, k]
            for j in range(p):
                out[i, j] += aik * b[k, j]
    return out


@njit(cache=True)
def _off_norm(a):
    n = a.shape[0]
    s = 0.0
    for p in range(n):
        for q in range(n):
            if p != q:
                s += a[p, q] * a[p, q]
    return math.sqrt(s)


@njit(cache=True)
def jacobi_eigh(a, tol, max_sweeps):
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    sweeps = 0
    while sweeps < max_sweeps:
        if _off_norm(A) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
        sweeps += 1
    w = np.empty(n)
    for i in range(n):
        w[i] = A[i, i]
    return w, V, _off_norm(A)


@njit(cache=True)
def _sqdist_bounded(x, i, j, bound):
    # Sequential sum of squares, abandoned once it exceeds bound. Partial sums
    # never decrease, so the early exit is exact; checking every 8 terms keeps
    # the branch out of the inner loop.
    d = x.shape[1]
    s = 0.0
    t = 0
    while t < d:
        stop = min(t + 8, d)
        for u in range(t, stop):
            diff = x[i, u] - x[j, u]
            s += diff * diff
        if s > bound:
            return s
        t = stop
    return s


@njit(cache=True)
def radius_neighbors(x, eps):
    # Each pair is measured once; rows come out ascending because pairs are
    # visited in row-major order of the upper triangle.
    n = x.shape[0]
    eps2 = eps * eps
    counts = np.ones(n, dtype=np.int64)
    cap = max(16, 2 * n)
    pairs = np.empty((cap, 2), dtype=np.int64)
    m = 0
    for i in range(n):
        for j in range(i + 1, n):
            if _sqdist_bounded(x, i, j, eps2) <= eps2:
                if m == cap:
                    cap *= 2
                    grown = np.empty((cap, 2), dtype=np.int64)
                    grown[:m] = pairs[:m]
                    pairs = grown
                pairs[m, 0] = i
                pairs[m, 1] = j
                m += 1
                counts[i] += 1
                counts[j] += 1
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        indptr[i + 1] = indptr[i] + counts[i]
    fill = indptr[:-1].copy()
    indices = np.empty(indptr[n], dtype=np.int64)
    k = 0
    for i in range(n):
        # Lower neighbours of i were placed while visiting earlier rows.
        indices[fill[i]] = i
        fill[i] += 1
        while k < m and pairs[k, 0] == i:
            j = pairs[k, 1]
            indices[fill[i]] = j
            fill[i] += 1
            indices[fill[j]] = i
            fill[j] += 1
            k += 1
    return indptr, indices


@njit(cache=True)
def _push(best, i, s):
    k = best.shape[1]
    if s < best[i, k - 1]:
        r = k - 1
        while r > 0 and best[i, r - 1] > s:
            best[i, r] = best[i, r - 1]
            r -= 1
        best[i, r] = s


@njit(cache=True)
def knn_distances(x, k):
    # Distances to the k nearest other points, ascending per row. Each pair is
    # measured once and offered to both rows.
    n = x.shape[0]
    best = np.full((n, k), np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            bound = max(best[i, k - 1], best[j, k - 1])
            s = _sqdist_bounded(x, i, j, bound)
            if s < bound:
                _push(best, i, s)
                _push(best, j, s)
    return np.sqrt(best)


@njit(cache=True)
def dbscan_expand(indptr, indices, min_samples):
    n = indptr.shape[0] - 1
    labels = np.full(n, -1, dtype=np.int64)
    core = np.empty(n, dtype=np.bool_)
    for i in range(n):
        core[i] = indptr[i + 1] - indptr[i] >= min_samples
    queue = np.empty(n, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        labels[i] = cluster
        head = 0
        tail = 1
        queue[0] = i
        while head < tail:
            p = queue[head]
            head += 1
            for e in range(indptr[p], indptr[p + 1]):
                j = indices[e]
                if labels[j] == -1:
                    labels[j] = cluster
                    if core[j]:
                        queue[tail] = j
                        tail += 1
        cluster += 1
    return labels, core
