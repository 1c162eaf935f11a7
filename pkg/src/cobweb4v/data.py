"""IDX (MNIST) container parsing and the split constructions used by the experiments."""
from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cobweb4v.tree import Instance

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class IdxError(ValueError):
    """Malformed IDX content."""


class BadMagicError(IdxError):
    pass


class TruncatedFileError(IdxError):
    pass


class CountMismatchError(IdxError):
    pass


class SplitConstructionError(ValueError):
    pass


def _read_bytes(path) -> bytes:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as fh:
        return fh.read()


def parse_idx(raw: bytes, expected_magic: int) -> np.ndarray:
    if len(raw) < 4:
        raise TruncatedFileError("file shorter than the IDX magic number")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise BadMagicError(f"magic {magic:#010x}, expected {expected_magic:#010x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedFileError("truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims, dtype=np.int64))
    if len(raw) - header < size:
        raise TruncatedFileError(f"expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx_images(path, normalize: bool = True) -> np.ndarray:
    """Images as an (n, rows, cols) array, scaled to [0, 1] unless ``normalize`` is False."""
    raw = parse_idx(_read_bytes(path), IMAGE_MAGIC)
    return raw / 255.0 if normalize else raw.copy()


def load_idx_labels(path) -> np.ndarray:
    return parse_idx(_read_bytes(path), LABEL_MAGIC).astype(np.int64)


def write_idx(path, array: np.ndarray, compress: bool = False) -> None:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    data = struct.pack(">I", magic) + struct.pack(f">{array.ndim}I", *array.shape) + array.tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as fh:
        fh.write(data)


@dataclass
class Dataset:
    images: np.ndarray  # (n, pixels), floats in [0, 1]
    labels: np.ndarray
    name: str = ""
    shape: tuple = (28, 28)

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise CountMismatchError(
                f"{len(self.images)} images but {len(self.labels)} labels")
        if self.images.ndim > 2:
            self.shape = tuple(self.images.shape[1:])
        self.images = self.images.reshape(len(self.images), -1)

    def __len__(self) -> int:
        return len(self.labels)

    def instance(self, i: int, with_label: bool = True) -> Instance:
        return Instance(self.images[i], int(self.labels[i]) if with_label else None)

    def instances(self, indices=None, with_label: bool = True):
        if indices is None:
            indices = range(len(self))
        for i in indices:
            yield self.instance(int(i), with_label)

    def subset(self, indices, name: str | None = None) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[indices], self.labels[indices], name or self.name, self.shape)


def load_dataset(images_path, labels_path, name: str = "") -> Dataset:
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if len(images) != len(labels):
        raise CountMismatchError(f"{len(images)} images but {len(labels)} labels")
    return Dataset(images, labels, name or Path(images_path).name)


def find_mnist(directory) -> dict[str, Path]:
    """Locate the four MNIST files (plain or .gz) inside ``directory``."""
    directory = Path(directory)
    found = {}
    for key, stem in MNIST_FILES.items():
        for candidate in (stem, stem + ".gz", stem.replace("-idx", ".idx"),
                          stem.replace("-idx", ".idx") + ".gz"):
            if (directory / candidate).exists():
                found[key] = directory / candidate
                break
        else:
            raise FileNotFoundError(f"{stem}[.gz] not found in {directory}")
    return found


def load_mnist(directory=None) -> tuple[Dataset, Dataset]:
    directory = directory or os.environ.get("C4V_MNIST_DIR")
    if not directory:
        raise FileNotFoundError("no MNIST directory given and C4V_MNIST_DIR is unset")
    files = find_mnist(directory)
    train = load_dataset(files["train_images"], files["train_labels"], "mnist-train")
    test = load_dataset(files["test_images"], files["test_labels"], "mnist-test")
    return train, test


def make_exp1_splits(dataset: Dataset, seed: int, split_size: int = 10) -> list[np.ndarray]:
    """Seeded shuffle of all indices chunked into consecutive splits."""
    order = np.random.default_rng(seed).permutation(len(dataset))
    return [order[i:i + split_size] for i in range(0, len(order), split_size)]


def make_exp2_splits(dataset: Dataset, chosen_digit: int, seed: int, per_digit: int = 600,
                     n_splits: int = 10) -> list[np.ndarray]:
    """First split: every chosen-digit image plus ``per_digit`` of each other digit.

    The remaining images are shuffled and dealt evenly over the other splits,
    earliest splits taking one extra item when the count does not divide.
    """
    rng = np.random.default_rng(seed)
    labels = dataset.labels
    first = [np.flatnonzero(labels == chosen_digit)]
    rest = []
    for digit in np.unique(labels):
        if digit == chosen_digit:
            continue
        idx = np.flatnonzero(labels == digit)
        if len(idx) < per_digit:
            raise SplitConstructionError(
                f"digit {digit} has {len(idx)} images, fewer than {per_digit}")
        idx = rng.permutation(idx)
        first.append(idx[:per_digit])
        rest.append(idx[per_digit:])
    d1 = rng.permutation(np.concatenate(first))
    pool = rng.permutation(np.concatenate(rest)) if rest else np.array([], dtype=np.int64)
    return [d1] + list(np.array_split(pool, n_splits - 1))
