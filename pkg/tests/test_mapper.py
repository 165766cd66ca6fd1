import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from weightscope.dataset import PointCloud, synth_tree_cloud
from weightscope.mapper import (
    ClusterSet,
    build_cover,
    cluster_preimages,
    dbscan,
    filter_l2,
    filter_pca,
    mapper_pipeline,
    nerve,
    preimage,
)
from weightscope.nn import TrajectoryCloud
from oracles import brute_mapper, eps_graph_components


def graph_as_sets(graph):
    vertices = [frozenset(m.tolist()) for m in graph.members]
    from collections import Counter

    edges = Counter(
        (frozenset((vertices[a], vertices[b])), w) for (a, b), w in graph.edges.items()
    )
    triangles = Counter(frozenset((vertices[a], vertices[b], vertices[c])) for a, b, c in graph.triangles)
    return Counter(vertices), edges, triangles


class TestFilters:
    def test_l2_values(self):
        np.testing.assert_array_equal(filter_l2(np.array([[0.0, 0.0], [3.0, 4.0]]))[:, 0], [0.0, 5.0])

    def test_l2_homogeneous(self, rng):
        x = rng.standard_normal((10, 3))
        np.testing.assert_allclose(filter_l2(2 * x), 2 * filter_l2(x), rtol=1e-15)

    def test_pca_collinear_is_arc_length(self):
        t = np.linspace(-1, 3, 9)
        x = np.column_stack([t, -2 * t, 0.5 * t])
        v = filter_pca(x, 1)[:, 0]
        off_center = t != t.mean()
        ratio = (v - v.mean())[off_center] / (t - t.mean())[off_center]
        np.testing.assert_allclose(np.abs(ratio), np.linalg.norm([1, -2, 0.5]), rtol=1e-12)

    def test_pca_full_rank_preserves_distances(self, rng):
        x = rng.standard_normal((30, 4))
        v = filter_pca(x, 4)
        d_in = np.linalg.norm(x[:, None] - x[None], axis=2)
        d_out = np.linalg.norm(v[:, None] - v[None], axis=2)
        np.testing.assert_allclose(d_out, d_in, atol=1e-9)

    def test_pca_mean_maps_to_origin(self):
        x = np.array([[0.0, 0.0], [2.0, 1.0], [4.0, 2.0], [1.0, 3.0], [3.0, -1.0]])
        v = filter_pca(np.vstack([x, x.mean(0)]), 2)
        np.testing.assert_allclose(v[-1], 0.0, atol=1e-14)

    def test_pca_degenerate(self):
        with pytest.raises(ValueError):
            filter_pca(np.ones((4, 3)), 2)


class TestCover:
    def test_no_overlap(self):
        cover = build_cover(np.array([0.0, 10.0]), 3, 0.0)
        lower, upper = cover.intervals(0)
        np.testing.assert_allclose(lower, [0, 10 / 3, 20 / 3], rtol=1e-15, atol=1e-15)
        np.testing.assert_allclose(upper, [10 / 3, 20 / 3, 10], rtol=1e-15)

    def test_half_overlap(self):
        cover = build_cover(np.array([0.0, 10.0]), 3, 0.5)
        lower, upper = cover.intervals(0)
        assert upper[0] - lower[0] == pytest.approx(5.0)
        assert (lower[0], upper[0]) == pytest.approx((-5 / 6, 25 / 6))
        assert upper[0] - lower[1] == pytest.approx(2.5 * 2 - 10 / 3)

    def test_single_interval(self, rng):
        v = rng.uniform(-3, 7, 50)
        cover = build_cover(v, 1, 0.7)
        ((_, lower, upper),) = list(cover.elements())
        assert len(preimage(v, lower, upper)) == 50

    def test_constant_dimension_collapses(self):
        v = np.column_stack([np.linspace(0, 1, 5), np.full(5, 2.0)])
        cover = build_cover(v, 4, 0.2)
        assert cover.n_intervals == (4, 1)
        assert len(cover) == 4
        assert sum(len(preimage(v, lo, hi)) for _, lo, hi in cover.elements()) >= 5

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            build_cover(np.arange(3.0), 0, 0.1)
        with pytest.raises(ValueError):
            build_cover(np.arange(3.0), 2, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(
        arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 3)), elements=st.floats(-100, 100)),
        st.integers(1, 8),
        st.floats(0.0, 0.9),
    )
    def test_every_point_covered(self, values, n, p):
        cover = build_cover(values, n, p)
        hits = np.zeros(len(values), int)
        for _, lower, upper in cover.elements():
            hits[preimage(values, lower, upper)] += 1
        assert np.all(hits >= 1)

    def test_boundary_points_doubly_covered(self):
        v = np.linspace(0, 9, 91)
        cover = build_cover(v, 3, 0.2)
        hits = np.zeros(len(v), int)
        for _, lower, upper in cover.elements():
            hits[preimage(v, lower, upper)] += 1
        assert hits[np.argmin(np.abs(v - 3.0))] == 2 and hits[np.argmin(np.abs(v - 6.0))] == 2


class TestDbscan:
    def test_two_groups(self):
        x = np.array([[0.0], [0.1], [0.2], [10.0], [10.1]])
        labels = dbscan(x, 0.5, 2)
        comps, noise, _, _ = eps_graph_components(x, 0.5, 2)
        assert comps == {frozenset({0, 1, 2}), frozenset({3, 4})} and not noise
        assert labels.tolist() == [0, 0, 0, 1, 1]

    def test_identical_points(self):
        assert set(dbscan(np.zeros((6, 3)), 0.1, 6).tolist()) == {0}

    def test_single_point_is_noise(self):
        assert dbscan(np.zeros((1, 2)), 1.0, 2).tolist() == [-1]

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            dbscan(np.zeros((2, 2)), 0.0, 1)
        with pytest.raises(ValueError):
            dbscan(np.zeros((2, 2)), 1.0, 0)

    @settings(max_examples=40, deadline=None)
    @given(
        arrays(np.float64, st.tuples(st.integers(1, 40), st.integers(1, 3)), elements=st.floats(-5, 5)),
        st.floats(0.1, 2.0),
        st.integers(1, 5),
        st.randoms(use_true_random=False),
    )
    def test_permutation_invariance(self, x, eps, ms, rnd):
        perm = list(range(len(x)))
        rnd.shuffle(perm)
        perm = np.array(perm)
        a = dbscan(x, eps, ms)
        b_perm = dbscan(x[perm], eps, ms)
        b = np.empty_like(b_perm)
        b[perm] = b_perm
        comps, noise, core, adj = eps_graph_components(x, eps, ms)

        def core_partition(labels):
            return {frozenset(np.flatnonzero(core & (labels == l)).tolist()) for l in set(labels[core])}

        assert core_partition(a) == core_partition(b) == comps
        assert set(np.flatnonzero(a == -1).tolist()) == set(np.flatnonzero(b == -1).tolist()) == noise
        # Borders touching one cluster only must land identically.
        for i in np.flatnonzero(~core & (a >= 0)):
            owners = set(a[adj[i] & core].tolist())
            if len(owners) == 1:
                assert {frozenset(np.flatnonzero(a == a[i]))} == {frozenset(np.flatnonzero(b == b[i]))}


class TestNerve:
    def clusters(self, *sets):
        return ClusterSet([(i, np.array(sorted(s))) for i, s in enumerate(sets)], np.array([], int))

    def test_chain(self):
        g = nerve(self.clusters({1, 2}, {2, 3}, {4}))
        assert g.n_vertices == 3 and g.edges == {(0, 1): 1} and g.triangles == []

    def test_hollow_triangle(self):
        g = nerve(self.clusters({1, 2}, {2, 3}, {1, 3}), max_dim=2)
        assert set(g.edges) == {(0, 1), (0, 2), (1, 2)} and g.triangles == []

    def test_filled_triangle(self):
        g = nerve(self.clusters({1}, {1}, {1}), max_dim=2)
        assert len(g.edges) == 3 and g.triangles == [(0, 1, 2)]
        assert nerve(self.clusters({1}, {1}, {1}), max_dim=1).triangles == []

    def test_edge_weights_are_intersection_sizes(self):
        g = nerve(self.clusters({1, 2, 3, 4}, {3, 4, 5}))
        assert g.edges == {(0, 1): 2}

    def test_rejects_high_dimension(self):
        with pytest.raises(ValueError):
            nerve(self.clusters({1}), max_dim=3)


class TestPipeline:
    def test_single_blob(self, rng):
        g = mapper_pipeline(rng.normal(0, 0.05, (80, 3)), n_intervals=1, eps=0.5, min_samples=3)
        assert g.n_vertices == 1 and not g.edges

    def test_tree_topology(self):
        cloud = synth_tree_cloud(2, 100, noise=0.0)
        g = mapper_pipeline(cloud, "l2", n_intervals=3, overlap=0.34, eps=0.1, min_samples=3)
        adj = g.adjacency()
        degrees = sorted(len(adj[v]) for v in range(g.n_vertices))
        assert g.n_vertices == 4 and len(g.edges) == 3
        assert degrees == [1, 1, 1, 3]

    def test_matches_brute_force_oracle(self, rng):
        x = rng.standard_normal((150, 3))
        values = filter_pca(x, 2)
        g = mapper_pipeline(x, values, n_intervals=4, overlap=0.4, eps=0.6, min_samples=3, max_dim=2)
        assert graph_as_sets(g) == brute_mapper(x, values, 4, 0.4, 0.6, 3, 2)

    def test_canonical_order(self, rng):
        x = rng.standard_normal((200, 2))
        g = mapper_pipeline(x, n_intervals=5, overlap=0.3, eps=0.4, min_samples=2)
        keys = [(e, int(m[0])) for e, m in zip(g.cover_element, g.members)]
        assert keys == sorted(keys)

    def test_deterministic(self, rng):
        x = rng.standard_normal((120, 4))
        a = mapper_pipeline(x, "pca2", n_intervals=4, overlap=0.5, max_dim=2)
        b = mapper_pipeline(x.copy(), "pca2", n_intervals=4, overlap=0.5, max_dim=2)
        assert a.edges == b.edges and a.triangles == b.triangles
        assert [m.tolist() for m in a.members] == [m.tolist() for m in b.members]

    def test_nerve_soundness(self, rng):
        x = rng.standard_normal((100, 2))
        g = mapper_pipeline(x, n_intervals=6, overlap=0.5, eps=0.5, min_samples=2)
        sets = [set(m.tolist()) for m in g.members]
        for a, b in itertools.combinations(range(len(sets)), 2):
            assert ((a, b) in g.edges) == bool(sets[a] & sets[b])
            if (a, b) in g.edges:
                assert g.edges[(a, b)] == len(sets[a] & sets[b])

    def test_noise_in_one_preimage_clustered_in_another(self):
        # Point 3 is isolated inside the first interval but dense inside the second.
        x = np.array([[0.0], [0.05], [0.1], [0.5], [0.55], [0.6], [0.65]])
        clusters = cluster_preimages(x, x, build_cover(x, 2, 0.0), eps=0.1, min_samples=3)
        assert all(3 not in m for e, m in clusters.clusters if e == 0)
        assert any(3 in m for e, m in clusters.clusters if e == 1)

    def test_trajectory_metadata(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        cloud = TrajectoryCloud(0, pts, steps=2, neurons=2)
        g = mapper_pipeline(cloud, n_intervals=1, eps=0.1, min_samples=1)
        assert g.mean_step == [0.0, 1.0, 1.0]
        assert g.dominant_neurons[0] == [0, 1]

    def test_point_cloud_input(self):
        cloud = PointCloud(np.array([[0.0], [0.01], [0.02]]))
        assert mapper_pipeline(cloud, n_intervals=1, eps=0.05, min_samples=2).sizes == [3]
