"""Pure-numpy versions of the kernels in ``_numba``.

Loops that carry an accumulation order are kept as explicit Python loops over
the accumulation axis, vectorized over the other axes, so the floating-point
operation sequence per output element is the same as in the compiled kernels.
"""
from collections import deque

import numpy as np
from scipy.spatial.distance import cdist

_CHUNK = 256


# Non-finite results are detected by the caller; silence the intermediate warnings.
@np.errstate(over="ignore", invalid="ignore")
def matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += a[:, k, None] * b[None, k, :]
    return out


def _off_norm(a):
    off = a * a
    np.fill_diagonal(off, 0.0)
    return float(np.sqrt(off.sum()))


# A huge theta overflows theta**2 to inf, which correctly gives t = 0.
@np.errstate(over="ignore")
def jacobi_eigh(a, tol, max_sweeps):
    n = a.shape[0]
    A = np.array(a, dtype=np.float64)
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
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = 0.0
                A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        sweeps += 1
    return A.diagonal().copy(), V, _off_norm(A)


def radius_neighbors(x, eps):
    n = x.shape[0]
    eps2 = eps * eps
    rows = []
    for start in range(0, n, _CHUNK):
        d2 = cdist(x[start:start + _CHUNK], x, "sqeuclidean")
        rows.extend(np.flatnonzero(r <= eps2) for r in d2)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.concatenate(rows).astype(np.int64) if rows else np.empty(0, np.int64)
    return indptr, indices


def knn_distances(x, k):
    n = x.shape[0]
    out = np.empty((n, k))
    for start in range(0, n, _CHUNK):
        d2 = cdist(x[start:start + _CHUNK], x, "sqeuclidean")
        rows = np.arange(start, min(start + _CHUNK, n))
        d2[rows - start, rows] = np.inf
        part = np.partition(d2, k - 1, axis=1)[:, :k]
        out[start:start + len(rows)] = np.sqrt(np.sort(part, axis=1))
    return out


def dbscan_expand(indptr, indices, min_samples):
    n = len(indptr) - 1
    core = np.diff(indptr) >= min_samples
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for j in indices[indptr[p]:indptr[p + 1]]:
                if labels[j] == -1:
                    labels[j] = cluster
                    if core[j]:
                        queue.append(j)
        cluster += 1
    return labels, core
