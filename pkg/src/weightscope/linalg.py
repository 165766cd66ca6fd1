"""Dense matrix product and principal component analysis.

Matrices are plain 2-D ``float64`` numpy arrays. The product accumulates in a
fixed order (see :mod:`weightscope.kernels`), and the PCA eigensolver is a
cyclic Jacobi iteration, so both are bit-reproducible run to run.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class ZeroVarianceError(ValueError):
    """Raised when a point cloud has no spread to analyse."""


@dataclass(frozen=True)
class PcaBasis:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), nonincreasing

    @property
    def dim(self):
        return self.mean.shape[0]

    @property
    def k(self):
        return self.components.shape[0]


def _as_matrix(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def matmul(a, b):
    """Product ``a @ b`` with serial, row-major accumulation.

    Raises ``ValueError`` on a shape mismatch and ``FloatingPointError`` if the
    result overflows.
    """
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    out = kernels.matmul(a, b)
    if not np.isfinite(out).all():
        raise FloatingPointError("matrix product produced non-finite entries")
    return out


def covariance(points):
    """Sample covariance (divisor ``n - 1``) and column means."""
    x = _as_matrix(points, "points")
    n = x.shape[0]
    mean = x.mean(axis=0)
    centered = np.ascontiguousarray(x - mean)
    cov = kernels.matmul(np.ascontiguousarray(centered.T), centered) / (n - 1)
    # Mirror the upper triangle; the product is symmetric up to rounding only.
    cov = np.triu(cov) + np.triu(cov, 1).T
    return cov, mean


def symmetric_eigh(a, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigen-decompose a symmetric matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||a||_F)``. Returns ``(eigenvalues, eigenvectors)`` sorted by
    decreasing eigenvalue, eigenvectors as columns, signs normalized so the
    largest-magnitude entry of each is positive.
    """
    a = _as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got {a.shape}")
    threshold = tol * max(1.0, float(np.linalg.norm(a)))
    w, v, off = kernels.jacobi_eigh(a, threshold, max_sweeps)
    if off >= threshold:
        raise ArithmeticError(
            f"Jacobi iteration did not converge in {max_sweeps} sweeps (off-norm {off:.3e})"
        )
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    return w, _fix_signs(v.T).T


def _fix_signs(rows):
    # argmax returns the lowest index among ties.
    pivots = np.argmax(np.abs(rows), axis=1)
    signs = np.where(rows[np.arange(rows.shape[0]), pivots] < 0, -1.0, 1.0)
    return rows * signs[:, None]


def pca_fit(points, k):
    """Fit the top-``k`` principal components of an ``n x d`` point matrix."""
    x = _as_matrix(points, "points")
    n, d = x.shape
    if k < 1 or k > d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    if n < 2:
        raise ValueError("pca_fit needs at least two points")
    cov, mean = covariance(x)
    if not np.any(cov.diagonal() > 0):
        raise ZeroVarianceError("all points are identical; no principal direction exists")
    w, v = symmetric_eigh(cov)
    return PcaBasis(
        mean=mean,
        components=np.ascontiguousarray(v[:, :k].T),
        explained_variance=np.clip(w[:k], 0.0, None),
    )


def pca_project(basis, points):
    """Coordinates of ``points`` along the basis components, ``(n, k)``."""
    x = _as_matrix(points, "points")
    if x.shape[1] != basis.dim:
        raise ValueError(f"points have dimension {x.shape[1]}, basis expects {basis.dim}")
    centered = np.ascontiguousarray(x - basis.mean)
    return kernels.matmul(centered, np.ascontiguousarray(basis.components.T))


def pca_reconstruct(basis, coords):
    coords = _as_matrix(coords, "coords")
    return kernels.matmul(coords, basis.components) + basis.mean
