"""Procedurally generated factored-shapes dataset.

The specified factor is the shape class (square / circle / triangle /
cross); the unspecified factors are position, scale, rotation, and
brightness, drawn uniformly per record from an independent substream, so
every image carries exact ground-truth factor values. Rotation is generated
as a nuisance factor but excluded from regression metrics (it aliases under
the symmetries of three of the four shapes).
"""

import io
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend, rng
from .serialize import FormatError, read_exact

SHAPE_NAMES = ("square", "circle", "triangle", "cross")
FACTOR_NAMES = ("cx", "cy", "scale", "rotation", "brightness")
FACTOR_RANGES = {
    "cx": (0.25, 0.75),
    "cy": (0.25, 0.75),
    "scale": (0.15, 0.35),
    "rotation": (0.0, 2.0 * math.pi),
    "brightness": (0.5, 1.0),
}

DATASET_MAGIC = b"CYCD"
DATASET_VERSION = 1


@dataclass
class Dataset:
    images: np.ndarray  # [n, side, side] float32 in [0, 1]
    labels: np.ndarray  # [n] int64 shape classes
    factors: np.ndarray  # [n, 5] float32, columns follow FACTOR_NAMES
    side: int
    n_s: int
    seed: int

    def __len__(self):
        return self.images.shape[0]

    def flat_images(self):
        return np.ascontiguousarray(self.images.reshape(len(self), -1))

    def factor(self, name):
        return self.factors[:, FACTOR_NAMES.index(name)]


def render_shape(shape_class, cx, cy, scale, rotation, brightness, side):
    """Rasterize one shape; factors must lie in their documented ranges."""
    if not 0 <= shape_class < len(SHAPE_NAMES):
        raise ValueError(f"shape_class must be in [0, {len(SHAPE_NAMES)}), got {shape_class}")
    if side <= 0:
        raise ValueError("side must be positive")
    for name, value in zip(FACTOR_NAMES, (cx, cy, scale, rotation, brightness)):
        lo, hi = FACTOR_RANGES[name]
        ok = lo <= value < hi if name == "rotation" else lo <= value <= hi
        if not ok:
            raise ValueError(f"{name}={value} outside [{lo}, {hi}{')' if name == 'rotation' else ']'}")
    return backend.kernels.rasterize(
        int(shape_class), float(cx), float(cy), float(scale),
        float(rotation), float(brightness), int(side),
    )


def _make_record(seed, index, n_s, side):
    gen = rng.stream(seed, index)
    vals = []
    for name in FACTOR_NAMES:
        lo, hi = FACTOR_RANGES[name]
        vals.append(np.float32(gen.uniform(lo, hi)))
    label = index % n_s
    image = render_shape(label, *[float(v) for v in vals], side)
    return label, np.array(vals, dtype=np.float32), image


def _thread_count(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("CYCINV_THREADS")
    return max(1, int(env)) if env else 1


def generate_dataset(n, n_s, side, seed, threads=None):
    """n balanced records (class = index mod n_s); record i draws its factors
    from the substream (seed, i), so generation order cannot change bytes."""
    if n <= 0 or n % n_s != 0:
        raise ValueError(f"n={n} must be a positive multiple of n_s={n_s}")
    if not 1 <= n_s <= len(SHAPE_NAMES):
        raise ValueError(f"n_s must be in [1, {len(SHAPE_NAMES)}]")
    workers = _thread_count(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda i: _make_record(seed, i, n_s, side), range(n)))
    else:
        records = [_make_record(seed, i, n_s, side) for i in range(n)]
    labels = np.array([r[0] for r in records], dtype=np.int64)
    factors = np.stack([r[1] for r in records])
    images = np.stack([r[2] for r in records])
    return Dataset(images=images, labels=labels, factors=factors, side=side, n_s=n_s, seed=seed)


def save_dataset(path, ds):
    buf = io.BytesIO()
    buf.write(DATASET_MAGIC)
    buf.write(struct.pack("<IIHHQ", DATASET_VERSION, len(ds), ds.side, ds.n_s, ds.seed))
    for i in range(len(ds)):
        buf.write(struct.pack("<H", int(ds.labels[i])))
        buf.write(ds.factors[i].astype("<f4").tobytes())
        buf.write(ds.images[i].astype("<f4").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_dataset(path):
    with open(path, "rb") as f:
        magic = read_exact(f, 4)
        if magic != DATASET_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {DATASET_MAGIC!r}")
        version, count, side, n_s, seed = struct.unpack("<IIHHQ", read_exact(f, 20))
        if version != DATASET_VERSION:
            raise FormatError(f"unsupported dataset version {version}")
        labels = np.empty(count, dtype=np.int64)
        factors = np.empty((count, 5), dtype=np.float32)
        images = np.empty((count, side, side), dtype=np.float32)
        pixel_bytes = 4 * side * side
        for i in range(count):
            (labels[i],) = struct.unpack("<H", read_exact(f, 2))
            factors[i] = np.frombuffer(read_exact(f, 20), dtype="<f4")
            images[i] = np.frombuffer(read_exact(f, pixel_bytes), dtype="<f4").reshape(side, side)
        if f.read(1):
            raise FormatError("trailing bytes after dataset records")
    if count and labels.max() >= n_s:
        raise FormatError("record class exceeds header n_s")
    return Dataset(images=images, labels=labels, factors=factors, side=side, n_s=n_s, seed=seed)


def _subset(ds, idx):
    return Dataset(
        images=ds.images[idx],
        labels=ds.labels[idx],
        factors=ds.factors[idx],
        side=ds.side,
        n_s=ds.n_s,
        seed=ds.seed,
    )


def split(ds, train_fraction, seed):
    """Stratified seeded split; per-class train counts are round(fraction * n_c)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    gen = rng.stream(seed, 0x5D11)
    train_idx, test_idx = [], []
    for c in range(ds.n_s):
        members = np.flatnonzero(ds.labels == c)
        perm = members[gen.permutation(members.size)]
        k = int(round(train_fraction * members.size))
        train_idx.append(perm[:k])
        test_idx.append(perm[k:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return _subset(ds, train_idx), _subset(ds, test_idx)
