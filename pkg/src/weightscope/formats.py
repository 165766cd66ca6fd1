"""On-disk formats: trajectory snapshots, graphs, curves and images.

Snapshot file (``.wtrj``), little-endian::

    b"WTRJ"  u32 version (=1)
    per layer: u32 layer_index, u32 n_steps, u32 neurons, u32 dim,
               n_steps*neurons*dim float64, step-major then neuron-minor
    u32 CRC32 of every byte between the version word and the CRC

All writers go through a temporary file in the target directory followed by
``os.replace``.
"""
import csv
import io
import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .nn import TrajectoryCloud, TrainingLog

SNAPSHOT_MAGIC = b"WTRJ"
SNAPSHOT_VERSION = 1
_LAYER_HEADER = struct.Struct("<4I")


class SnapshotFormatError(ValueError):
    pass


class CorruptSnapshotError(SnapshotFormatError):
    pass


def atomic_write(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data if isinstance(data, bytes) else data.encode("utf-8"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def snapshot_bytes(clouds):
    payload = io.BytesIO()
    for c in clouds:
        payload.write(_LAYER_HEADER.pack(c.layer_index, c.steps, c.neurons, c.dim))
        payload.write(np.ascontiguousarray(c.points, dtype="<f8").tobytes())
    body = payload.getvalue()
    header = SNAPSHOT_MAGIC + struct.pack("<I", SNAPSHOT_VERSION)
    return header + body + struct.pack("<I", zlib.crc32(body))


def parse_snapshots(data):
    if len(data) < 12 or data[:4] != SNAPSHOT_MAGIC:
        raise SnapshotFormatError("not a WTRJ snapshot file")
    (version,) = struct.unpack("<I", data[4:8])
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    body = data[8:-4]
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptSnapshotError("snapshot CRC mismatch; the file is corrupt")
    clouds = []
    pos = 0
    while pos < len(body):
        if pos + _LAYER_HEADER.size > len(body):
            raise SnapshotFormatError("truncated layer header")
        layer, steps, neurons, dim = _LAYER_HEADER.unpack_from(body, pos)
        pos += _LAYER_HEADER.size
        nbytes = steps * neurons * dim * 8
        if pos + nbytes > len(body):
            raise SnapshotFormatError(f"layer {layer} payload truncated")
        points = np.frombuffer(body, dtype="<f8", count=steps * neurons * dim, offset=pos)
        clouds.append(TrajectoryCloud(layer, points.astype(np.float64).reshape(steps * neurons, dim), steps, neurons))
        pos += nbytes
    return clouds


def write_snapshots(path, clouds):
    atomic_write(path, snapshot_bytes(clouds))


def read_snapshots(path):
    return parse_snapshots(Path(path).read_bytes())


def select_layer(clouds, layer):
    for c in clouds:
        if c.layer_index == layer:
            if c.steps * c.neurons == 0:
                raise SnapshotFormatError(f"layer {layer} is empty")
            return c
    raise SnapshotFormatError(
        f"layer {layer} not in file (have {[c.layer_index for c in clouds]})"
    )


def graph_json(graph, with_members=False):
    nodes = []
    for v in range(graph.n_vertices):
        node = {
            "id": v,
            "size": graph.sizes[v],
            "mean_step": graph.mean_step[v],
            "cover_element": graph.cover_element[v],
        }
        if with_members:
            node["members"] = [int(m) for m in graph.members[v]]
        nodes.append(node)
    doc = {
        "nodes": nodes,
        "edges": [{"a": a, "b": b, "weight": w} for (a, b), w in graph.edges.items()],
        "triangles": [list(t) for t in graph.triangles],
    }
    return json.dumps(doc, indent=2) + "\n"


def read_graph_json(text):
    return json.loads(text)


def graph_dot(graph):
    """Undirected DOT; pen width is 5 * weight / max weight."""
    top = max(graph.edges.values(), default=1)
    lines = ["graph learning_graph {"]
    for v in range(graph.n_vertices):
        lines.append(f'  {v} [label="{graph.sizes[v]}"];')
    for (a, b), w in graph.edges.items():
        lines.append(f"  {a} -- {b} [penwidth={5.0 * w / top:.3f}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def pgm_bytes(image):
    """Binary PGM (P5, maxval 255) of an image with values in ``[0, 1]``."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    pixels = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def read_pgm(data):
    magic, dims, maxval, rest = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError("expected a P5 PGM with maxval 255")
    w, h = (int(x) for x in dims.split())
    return np.frombuffer(rest, dtype=np.uint8, count=w * h).reshape(h, w)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def log_csv(log):
    rows = zip(log.step, log.minibatch, (repr(float(x)) for x in log.loss), (repr(float(x)) for x in log.accuracy))
    return _csv_text(["step", "minibatch", "loss", "accuracy"], rows)


def confusion_csv(log):
    rows = []
    for step, conf in zip(log.step, log.confusion):
        for t in range(conf.shape[0]):
            for p in range(conf.shape[1]):
                rows.append((step, t, p, int(conf[t, p])))
    return _csv_text(["step", "true", "predicted", "count"], rows)


def read_log(run_dir):
    """Rebuild a :class:`TrainingLog` from ``log.csv`` and ``confusion.csv``."""
    run_dir = Path(run_dir)
    log = TrainingLog()
    with open(run_dir / "log.csv", newline="") as fh:
        entries = list(csv.DictReader(fh))
    with open(run_dir / "confusion.csv", newline="") as fh:
        cells = list(csv.DictReader(fh))
    n_classes = max((int(c["true"]) for c in cells), default=-1) + 1
    by_step = {}
    for c in cells:
        conf = by_step.setdefault(int(c["step"]), np.zeros((n_classes, n_classes), dtype=np.int64))
        conf[int(c["true"]), int(c["predicted"])] = int(c["count"])
    for e in entries:
        step = int(e["step"])
        log.append(step, int(e["minibatch"]), float(e["loss"]), float(e["accuracy"]), by_step[step])
    return log
