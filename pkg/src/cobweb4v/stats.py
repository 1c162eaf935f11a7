"""Streaming Gaussian sufficient statistics and entropy helpers.

Every concept stores, per pixel, a count / mean / M2 triple (Welford). Labels
are kept in a small count table. All logs are natural logs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

HALF_LOG_2PI_E = 0.5 * math.log(2.0 * math.pi * math.e)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

DEFAULT_SIGMA_FLOOR = 0.25
N_LABELS = 10


class ContractError(ValueError):
    """Raised when an operation's preconditions are violated."""


@dataclass
class AttrStats:
    """Per-pixel count, mean and sum of squared deviations."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, size: int) -> "AttrStats":
        return cls(0, np.zeros(size), np.zeros(size))

    @classmethod
    def from_batch(cls, data) -> "AttrStats":
        data = np.atleast_2d(np.asarray(data, dtype=float))
        if data.shape[0] == 0:
            return cls.empty(data.shape[1])
        mean = data.mean(axis=0)
        return cls(data.shape[0], mean, ((data - mean) ** 2).sum(axis=0))

    @property
    def size(self) -> int:
        return self.mean.shape[0]

    @property
    def var(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros_like(self.mean)
        return self.m2 / self.n

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)

    def copy(self) -> "AttrStats":
        return AttrStats(self.n, self.mean.copy(), self.m2.copy())

    def add(self, pixels: np.ndarray) -> None:
        """In-place Welford update with one observation."""
        if pixels.shape != self.mean.shape:
            raise ContractError(
                f"pixel vector of shape {pixels.shape} does not match {self.mean.shape}")
        self.n += 1
        delta = pixels - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (pixels - self.mean)
        # rounding can leave tiny negatives
        np.maximum(self.m2, 0.0, out=self.m2)

    def absorb(self, other: "AttrStats") -> None:
        """In-place pooled combination with another summary."""
        if other.mean.shape != self.mean.shape:
            raise ContractError("cannot merge statistics of different sizes")
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean.copy(), other.m2.copy()
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.m2 += other.m2 + delta * delta * (self.n * other.n / n)
        self.mean += delta * (other.n / n)
        self.n = n


def update(stats: AttrStats, pixels) -> AttrStats:
    """Return a new summary with one more observation folded in."""
    out = stats.copy()
    out.add(np.asarray(pixels, dtype=float))
    return out


def merge(a: AttrStats, b: AttrStats) -> AttrStats:
    """Pool two summaries (parallel Welford)."""
    if a.mean.shape != b.mean.shape:
        raise ContractError("cannot merge statistics of different sizes")
    out = a.copy()
    out.absorb(b)
    return out


@dataclass
class LabelTable:
    """Count of each label id among the instances under a concept."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros(N_LABELS, dtype=np.int64))

    @classmethod
    def from_dict(cls, counts: dict, n_labels: int = N_LABELS) -> "LabelTable":
        arr = np.zeros(n_labels, dtype=np.int64)
        for label, c in counts.items():
            arr[int(label)] = int(c)
        return cls(arr)

    def to_dict(self) -> dict[int, int]:
        return {int(i): int(c) for i, c in enumerate(self.counts) if c}

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def copy(self) -> "LabelTable":
        return LabelTable(self.counts.copy())

    def add(self, label) -> None:
        if label is not None:
            self.counts[label] += 1

    def absorb(self, other: "LabelTable") -> None:
        self.counts += other.counts


def gaussian_entropy(sigma, sigma_floor: float = DEFAULT_SIGMA_FLOOR):
    """Differential entropy of a normal with std ``max(sigma, sigma_floor)``.

    Works elementwise on arrays.
    """
    if sigma_floor <= 0:
        raise ContractError("sigma_floor must be positive")
    return HALF_LOG_2PI_E + np.log(np.maximum(sigma, sigma_floor))


def categorical_entropy(table) -> float:
    """Shannon entropy of a count table (dict, LabelTable or array)."""
    if isinstance(table, LabelTable):
        counts = table.counts
    elif isinstance(table, dict):
        counts = np.fromiter(table.values(), dtype=float)
    else:
        counts = np.asarray(table)
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ContractError("negative label count")
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def pixel_entropy_from_m2(n, m2, sigma_floor: float):
    """Sum over pixels of the clamped Gaussian entropy.

    ``n`` may be a vector and ``m2`` a matrix (one row per candidate).
    Uses ``log max(sigma, floor) = 0.5 * log max(m2 / n, floor**2)``.
    """
    m2 = np.asarray(m2)
    n = np.asarray(n, dtype=float)
    if m2.ndim == 2:
        var = m2 / n[:, None]
    else:
        var = m2 / n
    floor2 = sigma_floor * sigma_floor
    size = m2.shape[-1]
    return size * HALF_LOG_2PI_E + 0.5 * np.log(np.maximum(var, floor2)).sum(axis=-1)


def label_entropy_rows(counts):
    """Row-wise categorical entropy of a (k, n_labels) count matrix."""
    counts = np.asarray(counts, dtype=float)
    totals = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 0.0)
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)
