"""Hot numeric kernels with two interchangeable backends.

The numba backend is used when numba imports cleanly. Setting the environment
variable ``WEIGHTSCOPE_NO_NUMBA=1`` (any value other than ``""``/``"0"``) forces
the pure-numpy backend. Both backends accumulate in the same order, so the
matrix product and the Jacobi rotations agree bitwise between them.
"""
import os

from . import _numpy

BACKEND = "numpy"

if os.environ.get("WEIGHTSCOPE_NO_NUMBA", "") in ("", "0"):
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _impl = _numpy
else:
    _impl = _numpy

matmul = _impl.matmul
jacobi_eigh = _impl.jacobi_eigh
radius_neighbors = _impl.radius_neighbors
knn_distances = _impl.knn_distances
dbscan_expand = _impl.dbscan_expand


def backends():
    """Return ``{name: module}`` for every backend importable in this process."""
    found = {"numpy": _numpy}
    try:
        from . import _numba

        found["numba"] = _numba
    except ImportError:  # pragma: no cover
        pass
    return found


__all__ = [
    "BACKEND",
    "backends",
    "dbscan_expand",
    "jacobi_eigh",
    "knn_distances",
    "matmul",
    "radius_neighbors",
]
