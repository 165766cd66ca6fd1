"""Mapper: filter, overlapping cover, per-preimage DBSCAN, nerve.

Clustering always runs on the full-dimensional coordinates of the points whose
filter values fall inside a cover element (closed bounds on both ends).
"""
import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dataset import PointCloud
from .linalg import pca_fit, pca_project
from .nn import TrajectoryCloud

DEFAULT_INTERVALS = 30
DEFAULT_OVERLAP = 0.5
DEFAULT_MIN_SAMPLES = 3
DEFAULT_EPS_SCALE = 1.5
DEFAULT_EPS_NEIGHBORS = 5


@dataclass(frozen=True)
class Cover:
    lo: np.ndarray  # (d_f,)
    hi: np.ndarray
    n_intervals: tuple  # per dimension; 1 where lo == hi
    overlap: float

    @property
    def dim(self):
        return self.lo.shape[0]

    def intervals(self, axis):
        """``(lower, upper)`` arrays of the intervals along one filter axis."""
        n = self.n_intervals[axis]
        lo, hi = self.lo[axis], self.hi[axis]
        if lo == hi:
            return np.array([lo]), np.array([hi])
        w = (hi - lo) / n
        centers = lo + (np.arange(n) + 0.5) * w
        half = w * (1.0 + self.overlap) / 2.0
        lower, upper = centers - half, centers + half
        # Rounding can open slivers at the ends and, when overlap is 0, between
        # neighbours; snap them shut so every value in [lo, hi] stays covered.
        lower[0] = min(lower[0], lo)
        upper[-1] = max(upper[-1], hi)
        lower[1:] = np.minimum(lower[1:], upper[:-1])
        return lower, upper

    def elements(self):
        """Every hypercube as ``(index tuple, lower, upper)`` in lexicographic order."""
        bounds = [self.intervals(a) for a in range(self.dim)]
        for combo in itertools.product(*(range(len(b[0])) for b in bounds)):
            lower = np.array([bounds[a][0][i] for a, i in enumerate(combo)])
            upper = np.array([bounds[a][1][i] for a, i in enumerate(combo)])
            yield combo, lower, upper

    def __len__(self):
        return int(np.prod([len(self.intervals(a)[0]) for a in range(self.dim)]))


@dataclass
class ClusterSet:
    clusters: list  # of (cover element index, sorted member ids)
    noise: np.ndarray  # ids never assigned to any cluster


@dataclass
class LearningGraph:
    sizes: list
    members: list  # sorted int arrays, one per vertex
    cover_element: list
    mean_step: list
    dominant_neurons: list
    edges: dict = field(default_factory=dict)  # (a, b) with a < b -> weight
    triangles: list = field(default_factory=list)  # sorted (a, b, c)

    @property
    def n_vertices(self):
        return len(self.sizes)

    def adjacency(self):
        adj = defaultdict(set)
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def degree(self, v):
        return len(self.adjacency().get(v, ()))


def _coords(cloud):
    if isinstance(cloud, (TrajectoryCloud,)):
        return cloud.points
    if isinstance(cloud, PointCloud):
        return cloud.coords
    return np.asarray(cloud, dtype=np.float64)


def filter_l2(cloud):
    x = _coords(cloud)
    if x.shape[0] == 0:
        raise ValueError("empty cloud")
    return np.sqrt(np.einsum("ij,ij->i", x, x))[:, None]


def filter_pca(cloud, k, stride=1):
    """Project onto the top-``k`` principal directions of the cloud itself.

    The basis is fitted on every ``stride``-th point; all points are projected.
    """
    x = np.ascontiguousarray(_coords(cloud), dtype=np.float64)
    if k > x.shape[1]:
        raise ValueError(f"k={k} exceeds cloud dimension {x.shape[1]}")
    basis = pca_fit(x[::stride], k)
    return pca_project(basis, x)


def apply_filter(cloud, name, stride=1):
    if name == "l2":
        return filter_l2(cloud)
    if name.startswith("pca"):
        return filter_pca(cloud, int(name[3:] or 3), stride=stride)
    raise ValueError(f"unknown filter {name!r}; use 'l2' or 'pca<k>'")


def build_cover(values, n_intervals, overlap):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if n_intervals < 1:
        raise ValueError("n_intervals must be at least 1")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    counts = tuple(1 if l == h else int(n_intervals) for l, h in zip(lo, hi))
    return Cover(lo, hi, counts, float(overlap))


def preimage(values, lower, upper):
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    return np.flatnonzero(np.all((values >= lower) & (values <= upper), axis=1))


def adaptive_eps(points, scale=DEFAULT_EPS_SCALE, k=DEFAULT_EPS_NEIGHBORS):
    """``scale`` times the mean distance from a point to its ``k``-th nearest other point."""
    x = np.ascontiguousarray(points, dtype=np.float64)
    k = min(k, x.shape[0] - 1)
    if k < 1:
        return 0.0
    return scale * float(kernels.knn_distances(x, k)[:, -1].mean())


def dbscan(points, eps, min_samples):
    """Density clustering; returns integer labels with ``-1`` for noise.

    A point is core when at least ``min_samples`` points (itself included) lie
    within distance ``eps`` (inclusive). Clusters grow breadth-first from the
    lowest-index unclaimed core point; a border point joins whichever cluster
    reaches it first.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_samples < 1:
        raise ValueError("min_samples must be at least 1")
    return _dbscan(points, eps, min_samples)[0]


def _dbscan(points, eps, min_samples):
    x = np.ascontiguousarray(points, dtype=np.float64)
    if x.shape[0] == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=bool)
    indptr, indices = kernels.radius_neighbors(x, float(eps))
    return kernels.dbscan_expand(indptr, indices, int(min_samples))


def cluster_preimages(coords, values, cover, eps=None, min_samples=DEFAULT_MIN_SAMPLES,
                      eps_scale=DEFAULT_EPS_SCALE):
    """Run DBSCAN inside every cover element; ``eps=None`` picks it per element."""
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    clusters = []
    seen = np.zeros(coords.shape[0], dtype=bool)
    for element, (_, lower, upper) in enumerate(cover.elements()):
        ids = preimage(values, lower, upper)
        if ids.size == 0:
            continue
        sub = coords[ids]
        e = adaptive_eps(sub, eps_scale) if eps is None else eps
        labels, _ = _dbscan(sub, e, min_samples)
        found = []
        for lab in range(labels.max() + 1 if labels.size else 0):
            members = ids[labels == lab]
            found.append(members)
            seen[members] = True
        found.sort(key=lambda m: m[0])
        clusters.extend((element, m) for m in found)
    return ClusterSet(clusters, np.flatnonzero(~seen))


def nerve(cluster_set, max_dim=1, steps=None, neurons=None):
    """Nerve of the cluster cover, up to 2-simplices when ``max_dim == 2``."""
    if max_dim not in (1, 2):
        raise ValueError("max_dim must be 1 or 2")
    memberships = defaultdict(list)
    for v, (_, members) in enumerate(cluster_set.clusters):
        for p in members:
            memberships[int(p)].append(v)
    edges = Counter()
    triangles = set()
    for vs in memberships.values():
        if len(vs) < 2:
            continue
        for pair in itertools.combinations(vs, 2):
            edges[pair] += 1
        if max_dim == 2:
            triangles.update(itertools.combinations(vs, 3))
    sizes, members_list, elements, mean_step, dominant = [], [], [], [], []
    for element, members in cluster_set.clusters:
        sizes.append(int(members.size))
        members_list.append(members)
        elements.append(int(element))
        mean_step.append(float(np.mean(steps[members])) if steps is not None else float(np.mean(members)))
        if neurons is not None:
            dominant.append([int(i) for i, _ in Counter(neurons[members].tolist()).most_common(3)])
        else:
            dominant.append([])
    return LearningGraph(
        sizes=sizes,
        members=members_list,
        cover_element=elements,
        mean_step=mean_step,
        dominant_neurons=dominant,
        edges=dict(sorted(edges.items())),
        triangles=sorted(triangles),
    )


def mapper_pipeline(cloud, filter="l2", n_intervals=DEFAULT_INTERVALS, overlap=DEFAULT_OVERLAP,
                    eps=None, min_samples=DEFAULT_MIN_SAMPLES, max_dim=1,
                    eps_scale=DEFAULT_EPS_SCALE, stride=1):
    """Filter, cover, cluster and take the nerve of a point cloud.

    ``filter`` is ``"l2"``, ``"pca<k>"`` or a precomputed ``(n, d_f)`` array.
    """
    coords = _coords(cloud)
    values = apply_filter(cloud, filter, stride) if isinstance(filter, str) else np.asarray(filter)
    cover = build_cover(values, n_intervals, overlap)
    clusters = cluster_preimages(coords, values, cover, eps, min_samples, eps_scale)
    steps = neurons = None
    if isinstance(cloud, TrajectoryCloud):
        steps, neurons = cloud.step_labels, cloud.neuron_labels
    return nerve(clusters, max_dim, steps=steps, neurons=neurons)
