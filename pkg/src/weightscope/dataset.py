"""IDX image/label loading and synthetic point clouds.

Loaders read raw (uncompressed) IDX streams. Pixel bytes are scaled to
``[0, 1]`` by dividing by 255. Nothing is shuffled here.
"""
import io
import struct
from dataclasses import dataclass, field

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Base class for malformed IDX input."""


class IdxMagicError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    pass


class IdxDimensionError(IdxFormatError):
    pass


class LabelRangeError(IdxFormatError):
    pass


@dataclass
class ImageSet:
    pixels: np.ndarray  # (count, height * width), float64 in [0, 1]
    height: int
    width: int

    @property
    def count(self):
        return self.pixels.shape[0]

    @property
    def dim(self):
        return self.height * self.width

    def subset(self, n):
        return ImageSet(self.pixels[:n], self.height, self.width)


@dataclass
class LabelSet:
    labels: np.ndarray  # (count,), int64
    num_classes: int

    @property
    def count(self):
        return self.labels.shape[0]

    def subset(self, n):
        return LabelSet(self.labels[:n], self.num_classes)


@dataclass
class PointCloud:
    coords: np.ndarray  # (n, d)
    tags: np.ndarray | None = field(default=None)

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def d(self):
        return self.coords.shape[1]


def _read_all(source):
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    return source.read()


def _header(data, magic, n_dims, kind):
    need = 4 * (1 + n_dims)
    if len(data) < 4:
        raise IdxTruncatedError(f"{kind} stream shorter than its magic number")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise IdxMagicError(f"expected {kind} magic 0x{magic:08x}, found 0x{found:08x}")
    if len(data) < need:
        raise IdxTruncatedError(f"{kind} header truncated ({len(data)} of {need} bytes)")
    return struct.unpack(f">{n_dims}I", data[4:need]), data[need:]


def load_idx_images(source):
    """Decode an IDX image stream (bytes or binary file object)."""
    data = _read_all(source)
    (count, rows, cols), payload = _header(data, IMAGE_MAGIC, 3, "image")
    if count == 0 or rows == 0 or cols == 0:
        raise IdxDimensionError(f"zero dimension in image header ({count}, {rows}, {cols})")
    expected = count * rows * cols
    if len(payload) != expected:
        raise IdxTruncatedError(
            f"image payload holds {len(payload)} bytes, header declares {expected}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows * cols)
    return ImageSet(raw / 255.0, rows, cols)


def load_idx_labels(source, num_classes=None):
    """Decode an IDX label stream.

    ``num_classes`` defaults to ``max label + 1``; pass 10 for MNIST.
    """
    data = _read_all(source)
    (count,), payload = _header(data, LABEL_MAGIC, 1, "label")
    if len(payload) != count:
        raise IdxTruncatedError(f"label payload holds {len(payload)} bytes, header declares {count}")
    labels = np.frombuffer(payload, dtype=np.uint8).astype(np.int64)
    top = int(labels.max()) + 1 if count else 0
    if num_classes is None:
        num_classes = top
    elif top > num_classes:
        raise LabelRangeError(f"label {top - 1} out of range for {num_classes} classes")
    return LabelSet(labels, num_classes)


def idx_image_bytes(images):
    quantized = np.rint(np.clip(images.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = struct.pack(">4I", IMAGE_MAGIC, images.count, images.height, images.width)
    return header + quantized.tobytes()


def idx_label_bytes(labels):
    if labels.count and labels.labels.max() > 255:
        raise LabelRangeError("IDX labels are single bytes")
    return struct.pack(">2I", LABEL_MAGIC, labels.count) + labels.labels.astype(np.uint8).tobytes()


def load_idx_file(path, kind, num_classes=None):
    """Read an IDX file from disk, gunzipping ``*.gz`` paths."""
    import gzip

    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        data = fh.read()
    if kind == "images":
        return load_idx_images(io.BytesIO(data))
    return load_idx_labels(io.BytesIO(data), num_classes=num_classes)


def synth_tree_cloud(branch_count, points_per_branch, noise=0.0, seed=0):
    """Planar tree: a unit trunk up the y-axis from the origin, then branches.

    Branches are unit segments leaving the top of the trunk, their directions
    spread evenly over a 120 degree fan centred on the trunk (so two branches
    form a Y with all three arms 120 degrees apart). Points are ordered trunk
    first, then branch by branch, each segment walked outward. Tags hold 0 for
    the trunk and ``b + 1`` for branch ``b``.
    """
    if branch_count < 1:
        raise ValueError("branch_count must be at least 1")
    if points_per_branch < 2:
        raise ValueError("points_per_branch must be at least 2")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    fork = np.array([0.0, 1.0])
    trunk_t = np.linspace(0.0, 1.0, points_per_branch)
    pieces = [trunk_t[:, None] * fork]
    tags = [np.zeros(points_per_branch, dtype=np.int64)]
    if branch_count == 1:
        angles = np.array([np.pi / 2])
    else:
        angles = np.pi / 2 + np.linspace(np.pi / 3, -np.pi / 3, branch_count)
    s = np.linspace(0.0, 1.0, points_per_branch + 1)[1:]
    for b, theta in enumerate(angles):
        direction = np.array([np.cos(theta), np.sin(theta)])
        pieces.append(fork + s[:, None] * direction)
        tags.append(np.full(points_per_branch, b + 1, dtype=np.int64))
    coords = np.vstack(pieces)
    if noise > 0:
        rng = np.random.Generator(np.random.Philox(seed))
        coords = coords + rng.normal(0.0, noise, size=coords.shape)
    return PointCloud(coords, np.concatenate(tags))
