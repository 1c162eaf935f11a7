"""Category utility of a parent split into children.

``cu_info`` (entropy reduction) is what the learner optimizes; ``cu_prob``
(expected correct guesses, Gaussian density analogue for pixels) is kept for
comparison.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from cobweb4v.stats import (
    DEFAULT_SIGMA_FLOOR,
    AttrStats,
    ContractError,
    LabelTable,
    categorical_entropy,
    gaussian_entropy,
)

Part = tuple[AttrStats, LabelTable]


def _check(parent_stats: AttrStats, children: Sequence[Part]) -> None:
    if not children:
        raise ContractError("category utility needs at least one child")
    if any(s.n < 1 for s, _ in children):
        raise ContractError("empty child")
    if sum(s.n for s, _ in children) != parent_stats.n:
        raise ContractError("children counts do not sum to the parent count")


def entropy(stats: AttrStats, labels: LabelTable, sigma_floor: float = DEFAULT_SIGMA_FLOOR) -> float:
    return float(gaussian_entropy(stats.std, sigma_floor).sum() + categorical_entropy(labels))


def expected_guesses(stats: AttrStats, labels: LabelTable,
                     sigma_floor: float = DEFAULT_SIGMA_FLOOR) -> float:
    """Sum of squared probabilities; pixels use 1 / (2 sqrt(pi) sigma)."""
    sigma = np.maximum(stats.std, sigma_floor)
    pixel_part = (1.0 / (2.0 * math.sqrt(math.pi) * sigma)).sum()
    total = labels.total
    label_part = 0.0
    if total:
        p = labels.counts / total
        label_part = float((p * p).sum())
    return float(pixel_part + label_part)


def cu_info(parent_stats: AttrStats, parent_labels: LabelTable, children: Sequence[Part],
            sigma_floor: float = DEFAULT_SIGMA_FLOOR) -> float:
    _check(parent_stats, children)
    h_parent = entropy(parent_stats, parent_labels, sigma_floor)
    total = 0.0
    for stats, labels in children:
        total += stats.n / parent_stats.n * (h_parent - entropy(stats, labels, sigma_floor))
    return total / len(children)


def cu_prob(parent_stats: AttrStats, parent_labels: LabelTable, children: Sequence[Part],
            sigma_floor: float = DEFAULT_SIGMA_FLOOR) -> float:
    _check(parent_stats, children)
    g_parent = expected_guesses(parent_stats, parent_labels, sigma_floor)
    total = 0.0
    for stats, labels in children:
        total += stats.n / parent_stats.n * (expected_guesses(stats, labels, sigma_floor) - g_parent)
    return total / len(children)
