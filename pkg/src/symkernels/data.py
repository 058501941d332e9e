"""CIFAR-10 binary batches, deterministic minibatching, image transforms.

Record layout (3073 bytes): one label byte 0-9, then 1024 red, 1024
green and 1024 blue pixel bytes, each plane row-major 32x32.

Random streams use numpy's PCG64 seeded through ``SeedSequence``; the
shuffle for ``--subset`` and each epoch's permutation get their own
spawn keys, so a run is reproducible from its 64-bit seed alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from symkernels import symmetry

IMAGE_SHAPE = (3, 32, 32)
PIXELS = 3 * 32 * 32
RECORD_BYTES = 1 + PIXELS
N_CLASSES = 10
TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILE = "test_batch.bin"
CLASS_NAMES = (
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck",
)


class CifarFormatError(ValueError):
    def __init__(self, path, offset, reason):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{self.path}: {reason} at byte offset {offset}")


@dataclass
class Dataset:
    """Labeled images kept as raw bytes; ``images()`` returns floats in [0, 1]."""

    pixels: np.ndarray  # uint8 (N, 3, 32, 32)
    labels: np.ndarray  # int64 (N,)
    split: str = "train"

    def __post_init__(self):
        if len(self.pixels) != len(self.labels):
            raise ValueError(f"{len(self.pixels)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def images(self, indices=None) -> np.ndarray:
        px = self.pixels if indices is None else self.pixels[indices]
        return px.astype(np.float64) / 255.0

    def image(self, i: int) -> np.ndarray:
        return self.pixels[i].astype(np.float64) / 255.0

    def take(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        return Dataset(self.pixels[indices].copy(), self.labels[indices].copy(), self.split)


def decode_records(raw: bytes, path="<bytes>"):
    if len(raw) % RECORD_BYTES:
        whole = len(raw) // RECORD_BYTES
        raise CifarFormatError(
            path,
            whole * RECORD_BYTES,
            f"length {len(raw)} is not a multiple of {RECORD_BYTES}; truncated record {whole}",
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels >= N_CLASSES)
    if bad.size:
        raise CifarFormatError(
            path, int(bad[0]) * RECORD_BYTES, f"label byte {labels[bad[0]]} > {N_CLASSES - 1}"
        )
    pixels = records[:, 1:].reshape((-1,) + IMAGE_SHAPE).copy()
    return pixels, labels


def encode_records(pixels, labels) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8).reshape(-1, PIXELS)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    return np.concatenate([labels, pixels], axis=1).tobytes()


def read_batch_file(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise FileNotFoundError(f"CIFAR-10 batch file not found: {path}") from None
    return decode_records(raw, path)


def _resolve_dir(directory) -> Path:
    directory = Path(directory)
    nested = directory / "cifar-10-batches-bin"
    if not (directory / TEST_FILE).exists() and (nested / TEST_FILE).exists():
        return nested
    return directory


def load_cifar10(directory):
    """Returns ``(train, test)`` datasets from a directory of binary batches."""
    directory = _resolve_dir(directory)
    parts = [read_batch_file(directory / name) for name in TRAIN_FILES]
    train = Dataset(
        np.concatenate([p for p, _ in parts]), np.concatenate([l for _, l in parts]), "train"
    )
    test = Dataset(*read_batch_file(directory / TEST_FILE), "test")
    return train, test


def write_cifar10(directory, train: Dataset, test: Dataset):
    """Write datasets in the binary layout, train split over five files."""
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    chunks = np.array_split(np.arange(len(train)), len(TRAIN_FILES))
    for name, idx in zip(TRAIN_FILES, chunks):
        (directory / name).write_bytes(encode_records(train.pixels[idx], train.labels[idx]))
    (directory / TEST_FILE).write_bytes(encode_records(test.pixels, test.labels))


def _rank3(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim not in (3, 4):
        raise ValueError(f"expected an image (C,H,W) or batch (N,C,H,W), got shape {x.shape}")
    return x


def hflip(image) -> np.ndarray:
    return symmetry.hflip(_rank3(image))


def vflip(image) -> np.ndarray:
    return symmetry.vflip(_rank3(image))


def rot90(image) -> np.ndarray:
    """90 degrees counterclockwise; needs a square image."""
    return symmetry.rot90(_rank3(image))


@dataclass(frozen=True)
class BatchPlan:
    seed: int
    batch_size: int = 1280

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch size must be positive, got {self.batch_size}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    def permutation(self, n: int, epoch: int) -> np.ndarray:
        ss = np.random.SeedSequence(self.seed, spawn_key=(1, epoch))
        return np.random.Generator(np.random.PCG64(ss)).permutation(n)


def minibatches(dataset, plan: BatchPlan, epoch: int) -> list[np.ndarray]:
    """Epoch permutation cut into ``batch_size`` slices; the last may be short."""
    n = dataset if isinstance(dataset, int) else len(dataset)
    if n == 0:
        raise ValueError("cannot batch an empty dataset")
    if plan.batch_size > n:
        raise ValueError(f"batch size {plan.batch_size} exceeds dataset size {n}")
    perm = plan.permutation(n, epoch)
    return [perm[i : i + plan.batch_size] for i in range(0, n, plan.batch_size)]


def shuffled_subset(dataset: Dataset, size: int, seed: int) -> Dataset:
    """First ``size`` examples after a seeded shuffle."""
    if not 1 <= size <= len(dataset):
        raise ValueError(f"subset size must be in 1..{len(dataset)}, got {size}")
    ss = np.random.SeedSequence(seed, spawn_key=(0,))
    perm = np.random.Generator(np.random.PCG64(ss)).permutation(len(dataset))
    return dataset.take(perm[:size])


def synthetic_cifar(n_train, n_test, seed=0):
    """Random-pixel datasets in CIFAR shape, for tests and dry runs.

    Each class gets its own mean color so that a classifier can learn
    something; pixels are otherwise uniform noise.
    """
    rng = np.random.default_rng(seed)
    palette = rng.integers(40, 216, size=(N_CLASSES, 3))

    def make(n, split):
        labels = rng.integers(0, N_CLASSES, size=n)
        noise = rng.integers(-40, 41, size=(n,) + IMAGE_SHAPE)
        px = np.clip(palette[labels][:, :, None, None] + noise, 0, 255).astype(np.uint8)
        return Dataset(px, labels.astype(np.int64), split)

    return make(n_train, "train"), make(n_test, "test")
