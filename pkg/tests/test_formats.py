import struct
import zlib
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from weightscope.formats import (
    CorruptSnapshotError,
    SnapshotFormatError,
    atomic_write,
    graph_dot,
    graph_json,
    parse_snapshots,
    pgm_bytes,
    read_graph_json,
    read_log,
    read_pgm,
    select_layer,
    snapshot_bytes,
    confusion_csv,
    log_csv,
)
from weightscope.mapper import ClusterSet, nerve
from weightscope.nn import TrainingLog, TrajectoryCloud

GOLDEN = Path(__file__).parent / "golden"


def two_vertex_graph():
    clusters = ClusterSet([(0, np.array([0, 1, 2])), (1, np.array([2, 3]))], np.array([], int))
    steps = np.array([0, 1, 2, 3])
    return nerve(clusters, steps=steps, neurons=np.zeros(4, int))


class TestSnapshots:
    def test_layout(self):
        cloud = TrajectoryCloud(2, np.arange(6.0).reshape(3, 2), steps=3, neurons=1)
        data = snapshot_bytes([cloud])
        assert data[:4] == b"WTRJ"
        assert struct.unpack("<I", data[4:8]) == (1,)
        assert struct.unpack("<4I", data[8:24]) == (2, 3, 1, 2)
        np.testing.assert_array_equal(np.frombuffer(data[24:72], "<f8"), np.arange(6.0))
        assert struct.unpack("<I", data[72:]) == (zlib.crc32(data[8:72]),)
        assert len(data) == 76

    @settings(max_examples=30)
    @given(st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 5)), min_size=1, max_size=3),
           st.randoms(use_true_random=False))
    def test_round_trip_bitwise(self, shapes, rnd):
        clouds = []
        for i, (s, n, d) in enumerate(shapes):
            pts = np.array([rnd.uniform(-1e6, 1e6) for _ in range(s * n * d)]).reshape(s * n, d)
            clouds.append(TrajectoryCloud(i, pts, s, n))
        data = snapshot_bytes(clouds)
        back = parse_snapshots(data)
        assert snapshot_bytes(back) == data
        for a, b in zip(clouds, back):
            assert (a.layer_index, a.steps, a.neurons, a.dim) == (b.layer_index, b.steps, b.neurons, b.dim)
            assert a.points.tobytes() == b.points.tobytes()

    def test_crc_detects_corruption(self):
        data = bytearray(snapshot_bytes([TrajectoryCloud(0, np.ones((2, 2)), 2, 1)]))
        data[30] ^= 0x01
        with pytest.raises(CorruptSnapshotError):
            parse_snapshots(bytes(data))

    def test_bad_magic_and_version(self):
        good = snapshot_bytes([TrajectoryCloud(0, np.ones((1, 1)), 1, 1)])
        with pytest.raises(SnapshotFormatError):
            parse_snapshots(b"XXXX" + good[4:])
        with pytest.raises(SnapshotFormatError, match="version"):
            parse_snapshots(good[:4] + struct.pack("<I", 2) + good[8:])

    def test_select_layer(self):
        clouds = [TrajectoryCloud(0, np.ones((2, 2)), 2, 1), TrajectoryCloud(1, np.ones((0, 3)), 0, 0)]
        assert select_layer(clouds, 0) is clouds[0]
        with pytest.raises(SnapshotFormatError, match="empty"):
            select_layer(clouds, 1)
        with pytest.raises(SnapshotFormatError, match="not in file"):
            select_layer(clouds, 5)


class TestGraphFiles:
    def test_golden_json(self):
        assert graph_json(two_vertex_graph()) == (GOLDEN / "graph.json").read_text()

    def test_golden_dot(self):
        assert graph_dot(two_vertex_graph()) == (GOLDEN / "graph.dot").read_text()

    def test_json_key_order_and_members(self):
        doc = read_graph_json(graph_json(two_vertex_graph(), with_members=True))
        assert list(doc) == ["nodes", "edges", "triangles"]
        assert list(doc["nodes"][0]) == ["id", "size", "mean_step", "cover_element", "members"]
        assert doc["nodes"][1]["members"] == [2, 3]

    def test_json_structural_round_trip(self):
        g = two_vertex_graph()
        doc = read_graph_json(graph_json(g, with_members=True))
        assert [n["size"] for n in doc["nodes"]] == g.sizes
        assert {(e["a"], e["b"]): e["weight"] for e in doc["edges"]} == g.edges


class TestPgm:
    def test_header(self):
        data = pgm_bytes(np.zeros((28, 28)))
        assert data[:13] == b"P5\n28 28\n255\n"
        assert len(data) == 13 + 784

    def test_non_square_is_width_then_height(self):
        assert pgm_bytes(np.zeros((2, 3))).startswith(b"P5\n3 2\n255\n")

    def test_round_trip(self, rng):
        img = rng.integers(0, 256, (5, 7)) / 255.0
        np.testing.assert_array_equal(read_pgm(pgm_bytes(img)), np.rint(img * 255))


def test_log_round_trip(tmp_path):
    log = TrainingLog()
    log.append(1, 10, 2.25, 0.125, np.array([[3, 1], [0, 4]]))
    log.append(2, 20, 1.0 / 3.0, 0.875, np.array([[4, 0], [1, 3]]))
    atomic_write(tmp_path / "log.csv", log_csv(log))
    atomic_write(tmp_path / "confusion.csv", confusion_csv(log))
    back = read_log(tmp_path)
    assert back.step == log.step and back.minibatch == log.minibatch
    assert back.loss == log.loss and back.accuracy == log.accuracy
    for a, b in zip(back.confusion, log.confusion):
        np.testing.assert_array_equal(a, b)
    assert (tmp_path / "confusion.csv").read_text().splitlines()[:2] == ["step,true,predicted,count", "1,0,0,3"]


def test_atomic_write_leaves_no_temp(tmp_path):
    atomic_write(tmp_path / "sub" / "x.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["x.txt"]
