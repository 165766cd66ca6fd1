"""Diagnostics over trajectories, training logs and learning graphs."""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .linalg import ZeroVarianceError, pca_fit, pca_project


class NoFinalStepClusters(ValueError):
    """Every final-step point was labelled noise by the clusterer."""


@dataclass
class BranchingEvent:
    step: int
    group_a: list
    group_b: list


@dataclass
class BranchReport:
    final_branch_count: int
    branch_members: list  # sorted neuron-id lists, one per branch
    branching_events: list = field(default_factory=list)


@dataclass
class SurfaceImageGrid:
    images: np.ndarray  # (rows, cols, height, width) in [0, 1]
    steps: list
    orders: list  # per row: neuron ids in lateral order

    @property
    def shape(self):
        return self.images.shape[:2]


def weight_norms(cloud):
    """``(steps, neurons)`` array of per-neuron weight-vector norms."""
    if cloud.points.shape[0] == 0:
        raise ValueError("empty cloud")
    x = cloud.points
    return np.sqrt(np.einsum("ij,ij->i", x, x)).reshape(cloud.steps, cloud.neurons)


def _components(n, pairs):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return [find(i) for i in range(n)]


def branch_count(cloud, graph):
    """Count branches as components among vertices holding final-step points."""
    final = cloud.steps - 1
    steps = cloud.step_labels
    neurons = cloud.neuron_labels
    holding = [v for v, m in enumerate(graph.members) if np.any(steps[m] == final)]
    if not holding:
        raise NoFinalStepClusters(
            "no final-step point was clustered; increase eps or lower min_samples"
        )
    local = {v: i for i, v in enumerate(holding)}
    pairs = [(local[a], local[b]) for a, b in graph.edges if a in local and b in local]
    roots = _components(len(holding), pairs)
    groups = {}
    for v, root in zip(holding, roots):
        m = graph.members[v]
        ids = neurons[m[steps[m] == final]]
        groups.setdefault(root, set()).update(int(i) for i in ids)
    members = sorted(sorted(g) for g in groups.values())
    return BranchReport(len(members), members)


def _partition(points, tau):
    indptr, indices = kernels.radius_neighbors(np.ascontiguousarray(points), float(tau))
    pairs = []
    for i in range(points.shape[0]):
        pairs.extend((i, int(j)) for j in indices[indptr[i]:indptr[i + 1]] if j > i)
    return pairs


def default_tau(cloud, factor=5.0):
    """``factor`` times the median per-neuron displacement between snapshots."""
    arr = cloud.as_array()
    if cloud.steps < 2:
        return 0.0
    moves = np.linalg.norm(np.diff(arr, axis=0), axis=2)
    return factor * float(np.median(moves))


def branching_times(cloud, tau=None):
    """Steps at which groups of neurons split apart for good.

    At each step neurons are grouped by single linkage (distance ``<= tau``).
    Two neurons count as together at step ``t`` if they are linked at ``t`` or
    at any later step, transitively; an event is recorded whenever that
    relation loses a link between consecutive steps. Returned events split a
    group into two, ordered by step then by smallest neuron id.
    """
    if tau is None:
        tau = default_tau(cloud)
    elif tau <= 0:
        raise ValueError("tau must be positive")
    arr = cloud.as_array()
    n = cloud.neurons
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    # Backward sweep: labels[t] is the "together from t onwards" partition.
    labels = [None] * cloud.steps
    for t in range(cloud.steps - 1, -1, -1):
        for a, b in _partition(arr[t], tau):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        labels[t] = [find(i) for i in range(n)]

    events = []
    for t in range(1, cloud.steps):
        before, after = labels[t - 1], labels[t]
        blocks = {}
        for i in range(n):
            blocks.setdefault(before[i], {}).setdefault(after[i], []).append(i)
        for parts in blocks.values():
            if len(parts) < 2:
                continue
            ordered = sorted(parts.values(), key=lambda p: p[0])
            for k in range(len(ordered) - 1):
                rest = sorted(i for p in ordered[k + 1:] for i in p)
                events.append(BranchingEvent(t, ordered[k], rest))
    events.sort(key=lambda e: (e.step, e.group_a[0]))
    return events


def confusion_evolution(log, true_class):
    """``(snapshots, classes)`` predicted-class counts for one true class."""
    if not log.confusion:
        return np.zeros((0, 0), dtype=np.int64)
    n_classes = log.confusion[0].shape[0]
    if not 0 <= true_class < n_classes:
        raise ValueError(f"class {true_class} outside [0, {n_classes})")
    return np.array([c[true_class] for c in log.confusion])


def _normalize(img):
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def surface_images(cloud, steps, lateral_axis=1, img_h=28, img_w=28):
    """Difference images between laterally adjacent neurons at chosen steps.

    Neurons are ordered by their coordinate on principal component
    ``lateral_axis`` (fitted on the whole cloud). Each image is min-max
    normalized on its own; a flat difference maps to all zeros.
    """
    if cloud.dim != img_h * img_w:
        raise ValueError(f"cloud dimension {cloud.dim} is not {img_h}x{img_w}")
    for s in steps:
        if not 0 <= s < cloud.steps:
            raise ValueError(f"step {s} outside [0, {cloud.steps})")
    try:
        basis = pca_fit(cloud.points, lateral_axis + 1)
        lateral = pca_project(basis, cloud.points)[:, lateral_axis]
    except ZeroVarianceError:
        # Degenerate cloud (no variance): every ordering is equivalent.
        lateral = np.zeros(cloud.points.shape[0])
    lateral = lateral.reshape(cloud.steps, cloud.neurons)
    arr = cloud.as_array()
    rows, orders = [], []
    for s in steps:
        order = np.argsort(lateral[s], kind="stable")
        diffs = np.diff(arr[s][order], axis=0)
        rows.append([_normalize(d).reshape(img_h, img_w) for d in diffs])
        orders.append(order.tolist())
    images = np.array(rows, dtype=np.float64).reshape(len(steps), cloud.neurons - 1, img_h, img_w)
    return SurfaceImageGrid(images, list(steps), orders)
