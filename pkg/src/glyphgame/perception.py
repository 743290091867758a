"""Candidate feature datasets and the symbol-image encoder."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nn

FEATURE_MAGIC = b"GLYF"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIII")
_ITEM_HEAD = struct.Struct("<II")


class FeatureFileError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVec:
    values: np.ndarray
    item_id: int
    class_id: int


@dataclass(frozen=True)
class Dataset:
    """Feature vectors stored row-wise: row ``i`` is one image."""

    features: np.ndarray
    item_ids: np.ndarray
    class_ids: np.ndarray
    num_classes: int
    per_class: int

    def __post_init__(self):
        n = self.features.shape[0]
        if self.features.ndim != 2 or self.item_ids.shape != (n,) or self.class_ids.shape != (n,):
            raise ValueError("features, item_ids and class_ids must agree in length")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("dataset features must be finite")
        if len(np.unique(self.item_ids)) != n:
            raise ValueError("item ids must be unique")
        if n and (self.class_ids.min() < 0 or self.class_ids.max() >= self.num_classes):
            raise ValueError(f"class ids must lie in [0, {self.num_classes})")
        for a in (self.features, self.item_ids, self.class_ids):
            a.setflags(write=False)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def item(self, i: int) -> FeatureVec:
        return FeatureVec(self.features[i], int(self.item_ids[i]), int(self.class_ids[i]))

    def indices_by_class(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.class_ids == c) for c in range(self.num_classes)]

    def as_float32(self) -> "Dataset":
        """Copy with features rounded to float32, as stored in feature files."""
        feats = self.features.astype(np.float32).astype(np.float64)
        return Dataset(feats, self.item_ids.copy(), self.class_ids.copy(), self.num_classes, self.per_class)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.num_classes == other.num_classes
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.item_ids, other.item_ids)
            and np.array_equal(self.class_ids, other.class_ids)
        )


def generate_synthetic_dataset(num_classes: int, per_class: int, d: int, noise_sigma: float, seed: int) -> Dataset:
    """Gaussian clusters around well-separated prototypes in [-1, 1]^d.

    Prototypes are rejection-sampled until every pair is at least
    ``0.5 * sqrt(d)`` apart.
    """
    if num_classes < 2 or per_class < 1 or d < 2 or noise_sigma < 0:
        raise ValueError("need num_classes >= 2, per_class >= 1, d >= 2, noise_sigma >= 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    min_dist = 0.5 * np.sqrt(d)
    protos: list[np.ndarray] = []
    rejections = 0
    while len(protos) < num_classes:
        cand = rng.uniform(-1.0, 1.0, size=d)
        if all(np.linalg.norm(cand - p) >= min_dist for p in protos):
            protos.append(cand)
            continue
        rejections += 1
        if rejections >= 10_000:
            raise ValueError(
                f"could not place {num_classes} prototypes {min_dist:.3f} apart in {d} dims; try a larger d"
            )
    P = np.stack(protos)
    class_ids = np.repeat(np.arange(num_classes), per_class)
    noise = rng.normal(0.0, 1.0, size=(len(class_ids), d)) * noise_sigma
    features = P[class_ids] + noise
    return Dataset(features, np.arange(len(class_ids)), class_ids, num_classes, per_class)


def class_prototypes(dataset: Dataset) -> np.ndarray:
    return np.stack([dataset.features[idx].mean(axis=0) for idx in dataset.indices_by_class()])


# ------------------------------------------------------------ feature files

def write_feature_file(path, dataset: Dataset) -> None:
    """Serialize ``dataset``; values are stored as float32."""
    feats = dataset.features.astype("<f4")
    n, d = feats.shape
    chunks = [_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, n, d)]
    for i in range(n):
        chunks.append(_ITEM_HEAD.pack(int(dataset.item_ids[i]), int(dataset.class_ids[i])))
        chunks.append(feats[i].tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_feature_file(path) -> Dataset:
    """Parse a little-endian GLYF feature file.

    Layout: ``"GLYF"``, u32 version, u32 count, u32 dim, then per item
    u32 item_id, u32 class_id and ``dim`` f32 values.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FeatureFileError(f"{path}: truncated header at byte 0 ({len(raw)} of {_HEADER.size} bytes)")
    magic, version, count, d = _HEADER.unpack_from(raw, 0)
    if magic != FEATURE_MAGIC:
        raise FeatureFileError(f"{path}: bad magic {magic!r} at byte 0, expected {FEATURE_MAGIC!r}")
    if version != FEATURE_VERSION:
        raise FeatureFileError(f"{path}: unsupported version {version} at byte 4, expected {FEATURE_VERSION}")
    if d == 0:
        raise FeatureFileError(f"{path}: feature dimension 0 at byte 12")
    stride = _ITEM_HEAD.size + 4 * d
    expected = _HEADER.size + count * stride
    if len(raw) < expected:
        item = (len(raw) - _HEADER.size) // stride
        raise FeatureFileError(
            f"{path}: truncated payload, header (count={count}, d={d}) implies {expected} bytes; "
            f"item {item} starting at byte {_HEADER.size + item * stride} is incomplete, file ends at byte {len(raw)}"
        )
    if len(raw) > expected:
        raise FeatureFileError(f"{path}: {len(raw) - expected} trailing bytes after the last item at byte {expected}")
    rec = np.dtype([("item", "<u4"), ("cls", "<u4"), ("x", "<f4", (d,))])
    items = np.frombuffer(raw, dtype=rec, count=count, offset=_HEADER.size)
    feats = items["x"].astype(np.float64).reshape(count, d)
    bad = np.argwhere(~np.isfinite(feats))
    if len(bad):
        i, j = bad[0]
        off = _HEADER.size + i * stride + _ITEM_HEAD.size + 4 * j
        raise FeatureFileError(f"{path}: non-finite value {feats[i, j]} at byte {off} (item {i}, dim {j})")
    item_ids = items["item"].astype(np.int64)
    class_ids = items["cls"].astype(np.int64)
    num_classes = int(class_ids.max()) + 1 if count else 0
    counts = np.bincount(class_ids, minlength=num_classes) if count else np.zeros(0, int)
    if len(np.unique(item_ids)) != count:
        raise FeatureFileError(f"{path}: duplicate item ids")
    return Dataset(feats, item_ids, class_ids, num_classes, int(counts.min()) if count else 0)


# ------------------------------------------------------------ symbol encoder

class SymbolEncoder:
    """Flattened canvas -> tanh affine stack -> symbol feature vector."""

    def __init__(self, input_size: int, widths: Sequence[int] = (128, 32), rng=None, trainable: bool = True):
        self.input_size = input_size
        self.widths = tuple(int(w) for w in widths)
        self.trainable = trainable
        self.params = nn.ParameterSet()
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = input_size * input_size
        for i, w in enumerate(self.widths):
            nn.add_linear(self.params, f"enc{i}", fan_in, w, rng)
            fan_in = w

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def forward(self, flat) -> nn.Tensor:
        x = flat
        for i in range(len(self.widths)):
            x = nn.tanh(nn.linear(self.params, f"enc{i}", x))
        return x


def encode_symbol(encoder: SymbolEncoder, canvas) -> nn.Tensor:
    """Encode one canvas (size, size) or a batch (N, size, size)."""
    arr = np.asarray(canvas, dtype=np.float64)
    s = encoder.input_size
    if arr.shape[-2:] != (s, s):
        raise ValueError(f"canvas shape {arr.shape} does not match encoder input {s}x{s}")
    flat = arr.reshape(s * s) if arr.ndim == 2 else arr.reshape(arr.shape[0], s * s)
    return encoder.forward(nn.Tensor(flat))
