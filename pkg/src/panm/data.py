"""
Client datasets: synthetic clustered tasks and image-file ingestion.

Synthetic tasks start from one Gaussian blob per class. Each cluster then
applies its own transform to every client's train and test samples:

rotation
    a planar rotation by ``2*pi*c/r`` of every consecutive feature pair
label_swap
    transposition of labels ``2c`` and ``2c + 1``
"""
from __future__ import annotations

import csv
import gzip
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .theory import ConfigurationError


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: Literal["train", "test"] = "train"

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (d, f) with one label per row")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels out of range")
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.features[idx].copy(), self.labels[idx].copy(), self.num_classes, self.split)


@dataclass(frozen=True)
class ClientData:
    train: Dataset
    test: Dataset


def rotation_angles(r: int) -> np.ndarray:
    return 2 * np.pi * np.arange(r) / r


def rotate_pairs(x: np.ndarray, angle: float) -> np.ndarray:
    """Rotate each consecutive feature pair ``(x[2i], x[2i+1])`` by ``angle``."""
    if x.shape[-1] % 2:
        raise ConfigurationError("rotation needs an even feature dimension")
    # exact for multiples of a quarter turn, so that e.g. 180 deg twice is the identity
    quarter = angle / (np.pi / 2)
    if np.isclose(quarter, round(quarter)):
        c, s = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(round(quarter)) % 4]
    else:
        c, s = np.cos(angle), np.sin(angle)
    pairs = x.reshape(*x.shape[:-1], -1, 2)
    out = np.empty_like(pairs)
    out[..., 0] = c * pairs[..., 0] - s * pairs[..., 1]
    out[..., 1] = s * pairs[..., 0] + c * pairs[..., 1]
    return out.reshape(x.shape)


def swap_labels(y: np.ndarray, pair: tuple[int, int]) -> np.ndarray:
    a, b = pair
    out = y.copy()
    out[y == a] = b
    out[y == b] = a
    return out


def make_synthetic_clustered_tasks(
    n: int,
    r: int,
    d: int,
    heterogeneity: Literal["rotation", "label_swap"] = "rotation",
    num_classes: int = 4,
    feature_dim: int = 8,
    seed: int = 0,
    test_size: int = 100,
    class_sep: float = 1.5,
    noise: float = 1.0,
) -> tuple[list[ClientData], np.ndarray]:
    """Per-client train/test sets plus the hidden cluster id of every client.

    Clients ``[c*n/r, (c+1)*n/r)`` form cluster ``c``. Blob means are drawn
    once from ``seed``; every client then draws its own IID samples.
    """
    if n % r:
        raise ConfigurationError(f"n={n} is not divisible by r={r}")
    if heterogeneity == "rotation":
        if feature_dim % 2:
            raise ConfigurationError("rotation heterogeneity needs an even feature_dim")
    elif heterogeneity == "label_swap":
        if 2 * r > num_classes:
            raise ConfigurationError(f"label_swap with r={r} needs at least {2 * r} classes")
    else:
        raise ConfigurationError(f"unknown heterogeneity {heterogeneity!r}")
    if d < 1 or test_size < 1:
        raise ConfigurationError("d and test_size must be >= 1")

    base = np.random.default_rng([seed, 0xDA7A])
    means = base.normal(size=(num_classes, feature_dim)) * class_sep
    clusters = np.repeat(np.arange(r), n // r)
    angles = rotation_angles(r)

    def draw(rng, size, cluster, split):
        y = np.arange(size) % num_classes
        rng.shuffle(y)
        x = means[y] + noise * rng.normal(size=(size, feature_dim))
        if heterogeneity == "rotation":
            x = rotate_pairs(x, angles[cluster])
        else:
            y = swap_labels(y, (2 * cluster, 2 * cluster + 1))
        return Dataset(x, y.astype(np.int64), num_classes, split)

    clients = []
    for i in range(n):
        rng = np.random.default_rng([seed, 0xDA7A, i])
        c = int(clusters[i])
        clients.append(ClientData(draw(rng, d, c, "train"), draw(rng, test_size, c, "test")))
    return clients, clusters


# --------------------------------------------------------------------------
# external image files

class IngestionError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        super().__init__(message if offset is None else f"{message} (at byte offset {offset})")


_IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


def _read_bytes(path: str | Path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def parse_idx(raw: bytes) -> np.ndarray:
    """Decode an IDX buffer (big-endian header, e.g. magic 0x00000803)."""
    if len(raw) < 4:
        raise IngestionError("truncated IDX magic number", 0)
    if raw[0] != 0 or raw[1] != 0:
        raise IngestionError("IDX magic must start with two zero bytes", 0)
    code, ndim = raw[2], raw[3]
    if code not in _IDX_DTYPES:
        raise IngestionError(f"unknown IDX element type 0x{code:02x}", 2)
    if ndim == 0:
        raise IngestionError("IDX file declares zero dimensions", 3)
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IngestionError("truncated IDX dimension header", len(raw))
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    dtype = _IDX_DTYPES[code]
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(raw) - header != expected:
        raise IngestionError(
            f"IDX payload holds {len(raw) - header} bytes, header promises {expected}",
            header + min(expected, len(raw) - header),
        )
    return np.frombuffer(raw, dtype=dtype, offset=header).reshape(dims)


def _parse_csv(raw: bytes) -> tuple[np.ndarray, np.ndarray]:
    labels, rows = [], []
    offset = 0
    width = None
    for lineno, line in enumerate(io.BytesIO(raw)):
        text = line.decode("utf-8").strip()
        start, offset = offset, offset + len(line)
        if not text:
            continue
        fields = next(csv.reader([text]))
        try:
            vals = [float(v) for v in fields]
        except ValueError:
            if lineno == 0:
                continue  # header row
            raise IngestionError(f"non-numeric field on line {lineno + 1}", start) from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise IngestionError(f"line {lineno + 1} has {len(vals)} fields, expected {width}", start)
        labels.append(vals[0])
        rows.append(vals[1:])
    if not rows:
        raise IngestionError("CSV file holds no data rows", 0)
    side = int(round(np.sqrt(width - 1)))
    if side * side != width - 1:
        raise IngestionError(f"{width - 1} pixels per row do not form a square image", 0)
    pixels = np.asarray(rows, dtype=float).reshape(-1, side, side)
    return pixels, np.asarray(labels).astype(np.int64)


def load_images(
    path: str | Path, fmt: Literal["idx", "csv"], labels_path: str | Path | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Images as ``(N, side, side)`` floats in ``[0, 1]`` plus integer labels."""
    raw = _read_bytes(path)
    if fmt == "csv":
        images, labels = _parse_csv(raw)
    elif fmt == "idx":
        if labels_path is None:
            raise IngestionError("IDX images need a separate labels file")
        images = parse_idx(raw)
        labels = parse_idx(_read_bytes(labels_path)).astype(np.int64)
        if images.ndim != 3:
            raise IngestionError(f"IDX images must be 3-D, got {images.ndim}-D", 3)
        if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
            raise IngestionError("label file does not match the image count", 4)
        if images.shape[1] != images.shape[2]:
            raise IngestionError("images must be square", 8)
    else:
        raise IngestionError(f"unknown format {fmt!r}")
    images = images.astype(float)
    if images.max(initial=0.0) > 1.0:
        images = images / 255.0
    return images, labels


def rotate_quarter_turns(images: np.ndarray, quarter_turns: int) -> np.ndarray:
    """Rotate ``(..., side, side)`` images counter-clockwise by 90-degree steps."""
    return np.rot90(images, k=quarter_turns % 4, axes=(-2, -1))


def ingest_external_images(
    path: str | Path,
    fmt: Literal["idx", "csv"],
    quarter_turns: Sequence[int],
    n_clients: int,
    train_per_client: int,
    test_per_client: int = 100,
    seed: int = 0,
    labels_path: str | Path | None = None,
    num_classes: int | None = None,
) -> tuple[list[ClientData], np.ndarray]:
    """Partition an image file IID across clients, rotated per cluster.

    ``quarter_turns[c]`` is the rotation of cluster ``c``; clients are split
    into ``len(quarter_turns)`` equal consecutive blocks.
    """
    r = len(quarter_turns)
    if r < 1 or n_clients % r:
        raise ConfigurationError("n_clients must be a positive multiple of the cluster count")
    images, labels = load_images(path, fmt, labels_path)
    per = train_per_client + test_per_client
    if per * n_clients > len(labels):
        raise ConfigurationError(f"{len(labels)} images cannot give {n_clients} clients {per} samples each")
    classes = int(num_classes if num_classes is not None else labels.max() + 1)
    order = np.random.default_rng([seed, 0x1D6]).permutation(len(labels))
    clusters = np.repeat(np.arange(r), n_clients // r)
    out = []
    for i in range(n_clients):
        idx = order[i * per : (i + 1) * per]
        x = rotate_quarter_turns(images[idx], quarter_turns[clusters[i]]).reshape(len(idx), -1)
        y = labels[idx]
        out.append(
            ClientData(
                Dataset(np.ascontiguousarray(x[:train_per_client]), y[:train_per_client].copy(), classes, "train"),
                Dataset(np.ascontiguousarray(x[train_per_client:]), y[train_per_client:].copy(), classes, "test"),
            )
        )
    return out, clusters
