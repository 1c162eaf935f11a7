"""Concept hierarchy: nodes, structural edits, derived probabilities, JSON snapshots."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from cobweb4v.stats import (
    DEFAULT_SIGMA_FLOOR,
    N_LABELS,
    AttrStats,
    ContractError,
    LabelTable,
    categorical_entropy,
    gaussian_entropy,
)

_ids = itertools.count()


@dataclass
class Instance:
    pixels: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float).ravel()


class ConceptNode:
    """A concept: pixel statistics, a label table and ordered children."""

    __slots__ = ("stats", "labels", "children", "id")

    def __init__(self, stats: AttrStats, labels: Optional[LabelTable] = None,
                 children: Optional[list] = None):
        self.stats = stats
        self.labels = labels if labels is not None else LabelTable()
        self.children: list[ConceptNode] = children if children is not None else []
        self.id = next(_ids)

    @classmethod
    def from_instance(cls, instance: Instance, n_labels: int = N_LABELS) -> "ConceptNode":
        stats = AttrStats(1, instance.pixels.copy(), np.zeros_like(instance.pixels))
        labels = LabelTable(np.zeros(n_labels, dtype=np.int64))
        labels.add(instance.label)
        return cls(stats, labels)

    @property
    def n(self) -> int:
        return self.stats.n

    def is_leaf(self) -> bool:
        return not self.children

    def absorb(self, instance: Instance) -> None:
        self.stats.add(instance.pixels)
        self.labels.add(instance.label)

    def walk(self) -> Iterator["ConceptNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def height(self) -> int:
        if not self.children:
            return 0
        return 1 + max(c.height() for c in self.children)

    def to_dict(self) -> dict:
        return {
            "n": self.stats.n,
            "mean": self.stats.mean.tolist(),
            "m2": self.stats.m2.tolist(),
            "label_counts": {str(k): v for k, v in self.labels.to_dict().items()},
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, data: dict, n_labels: int = N_LABELS) -> "ConceptNode":
        # iterative to survive deep trees
        root = None
        stack = [(data, None)]
        while stack:
            d, parent = stack.pop()
            node = cls(
                AttrStats(int(d["n"]), np.asarray(d["mean"], dtype=float),
                          np.asarray(d["m2"], dtype=float)),
                LabelTable.from_dict(d.get("label_counts", {}), n_labels),
            )
            if parent is None:
                root = node
            else:
                parent.children.append(node)
            for child in reversed(d.get("children", [])):
                stack.append((child, node))
        return root


def node_probability(node: ConceptNode, parent: ConceptNode) -> float:
    """P(node | parent) as a count ratio."""
    if parent.stats.n <= 0:
        raise ContractError("parent has zero count")
    return node.stats.n / parent.stats.n


def node_entropy(node: ConceptNode, sigma_floor: float = DEFAULT_SIGMA_FLOOR) -> float:
    """Sum of per-pixel Gaussian entropies plus the label entropy."""
    if node.stats.n < 1:
        raise ContractError("entropy of an empty node")
    pixel_part = gaussian_entropy(node.stats.std, sigma_floor).sum()
    return float(pixel_part + categorical_entropy(node.labels))


def _child_index(parent: ConceptNode, node: ConceptNode) -> int:
    for i, c in enumerate(parent.children):
        if c is node:
            return i
    raise ContractError("node is not a child of parent")


def add_child(parent: ConceptNode, node: ConceptNode) -> None:
    parent.children.append(node)


def merge_children(parent: ConceptNode, c1: ConceptNode, c2: ConceptNode) -> ConceptNode:
    """Replace siblings ``c1`` and ``c2`` by a new node that has them as children.

    The merged node takes the position of whichever of the two came first.
    """
    if c1 is c2:
        raise ContractError("merge targets must be distinct")
    i1, i2 = _child_index(parent, c1), _child_index(parent, c2)
    stats = c1.stats.copy()
    stats.absorb(c2.stats)
    labels = c1.labels.copy()
    labels.absorb(c2.labels)
    merged = ConceptNode(stats, labels, [c1, c2])
    first, second = min(i1, i2), max(i1, i2)
    del parent.children[second]
    parent.children[first] = merged
    return merged


def split_child(parent: ConceptNode, node: ConceptNode) -> None:
    """Remove ``node`` and promote its children into its slot."""
    if not node.children:
        raise ContractError("cannot split a leaf")
    i = _child_index(parent, node)
    parent.children[i:i + 1] = node.children


@dataclass
class TreeConfig:
    sigma_floor: float = DEFAULT_SIGMA_FLOOR
    n_max_default: int = 300
    seed: int = 0
    n_labels: int = N_LABELS


@dataclass
class CobwebTree:
    """The concept hierarchy plus its configuration.

    ``root`` is ``None`` until the first instance is learned.
    """

    config: TreeConfig = field(default_factory=TreeConfig)
    root: Optional[ConceptNode] = None

    @property
    def sigma_floor(self) -> float:
        return self.config.sigma_floor

    @property
    def n(self) -> int:
        return 0 if self.root is None else self.root.stats.n

    def nodes(self) -> Iterator[ConceptNode]:
        if self.root is not None:
            yield from self.root.walk()

    def ifit(self, instance: Instance) -> ConceptNode:
        from cobweb4v.learner import ifit
        return ifit(self, instance)

    def fit(self, instances) -> None:
        for inst in instances:
            self.ifit(inst)

    def to_dict(self) -> dict:
        return {
            "config": {
                "sigma_floor": self.config.sigma_floor,
                "n_max_default": self.config.n_max_default,
                "seed": self.config.seed,
                "n_labels": self.config.n_labels,
            },
            "root": None if self.root is None else self.root.to_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "CobwebTree":
        config = TreeConfig(**data.get("config", {}))
        root = data.get("root")
        return cls(config, None if root is None else ConceptNode.from_dict(root, config.n_labels))

    @classmethod
    def loads(cls, text: str) -> "CobwebTree":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "CobwebTree":
        with open(path) as fh:
            return cls.loads(fh.read())
