"""Best-first categorization and mixture prediction over expanded concepts."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cobweb4v.stats import HALF_LOG_2PI, ContractError
from cobweb4v.tree import CobwebTree, ConceptNode, Instance


@dataclass
class PredictOutcome:
    label_probs: np.ndarray
    expanded: list = field(default_factory=list)  # (node, log score) in expansion order
    weights: np.ndarray = None

    def as_dict(self) -> dict[int, float]:
        return {i: float(p) for i, p in enumerate(self.label_probs)}

    @property
    def label(self) -> int:
        # argmax returns the first maximum, i.e. the smallest label id
        return int(np.argmax(self.label_probs))


def log_likelihood(means, m2s, ns, pixels, sigma_floor):
    """ln P(x | c) for one or many concepts (rows), pixels only."""
    means = np.atleast_2d(means)
    m2s = np.atleast_2d(m2s)
    ns = np.atleast_1d(np.asarray(ns, dtype=float))
    var = np.maximum(m2s / ns[:, None], sigma_floor * sigma_floor)
    diff = pixels[None, :] - means
    return -(HALF_LOG_2PI * means.shape[1]
             + 0.5 * np.log(var).sum(axis=1)
             + 0.5 * (diff * diff / var).sum(axis=1))


def log_collocation(node: ConceptNode, tree: CobwebTree, instance: Instance) -> float:
    """ln P(c) + 2 ln P(x|c); equals ln[P(c|x) P(x|c)] up to the constant -ln P(x)."""
    if node.stats.n < 1:
        raise ContractError("collocation of an empty node")
    ll = log_likelihood(node.stats.mean, node.stats.m2, [node.stats.n],
                        instance.pixels, tree.sigma_floor)[0]
    return math.log(node.stats.n / tree.root.stats.n) + 2.0 * float(ll)


def _children_scores(node: ConceptNode, log_root_n: float, pixels, floor) -> np.ndarray:
    children = node.children
    ns = np.array([c.stats.n for c in children], dtype=float)
    ll = log_likelihood(np.stack([c.stats.mean for c in children]),
                        np.stack([c.stats.m2 for c in children]), ns, pixels, floor)
    return np.log(ns) - log_root_n + 2.0 * ll


def softmax_weights(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    w = np.exp(scores - scores.max())
    return w / w.sum()


def smoothed_label_probs(node: ConceptNode) -> np.ndarray:
    counts = node.labels.counts.astype(float)
    return (counts + 1.0) / (counts.sum() + counts.shape[0])


def predict(tree: CobwebTree, instance: Instance, n_max: int | None = None) -> PredictOutcome:
    """Expand up to ``n_max`` concepts best-first and mix their label tables."""
    if n_max is None:
        n_max = tree.config.n_max_default
    if n_max < 1:
        raise ContractError("n_max must be at least 1")
    if tree.root is None:
        raise ContractError("cannot predict with an empty tree")
    pixels = instance.pixels
    if pixels.shape != tree.root.stats.mean.shape:
        raise ContractError("instance dimensionality does not match the tree")

    floor = tree.sigma_floor
    log_root_n = math.log(tree.root.stats.n)
    root_score = log_collocation(tree.root, tree, instance)
    # heap entries: (-score, push order, node); push order makes the order total
    frontier = [(-root_score, 0, tree.root)]
    pushed = 1
    expanded = []
    while frontier and len(expanded) < n_max:
        neg, _, node = heapq.heappop(frontier)
        expanded.append((node, -neg))
        if node.children and len(expanded) < n_max:
            for child, s in zip(node.children, _children_scores(node, log_root_n, pixels, floor)):
                heapq.heappush(frontier, (-float(s), pushed, child))
                pushed += 1

    weights = softmax_weights([s for _, s in expanded])
    tables = np.stack([smoothed_label_probs(node) for node, _ in expanded])
    probs = weights @ tables
    return PredictOutcome(probs, expanded, weights)


def predict_many(tree: CobwebTree, x: np.ndarray, nmax_values: Sequence[int]) -> np.ndarray:
    """Labels for every row of ``x`` at each N_max, from one best-first run per row.

    The expansion order for a small N_max is a prefix of the order for a larger
    one, so a single search up to ``max(nmax_values)`` serves all of them.
    """
    top = max(nmax_values)
    floor = tree.sigma_floor
    log_root_n = math.log(tree.root.stats.n)
    tables: dict[int, np.ndarray] = {}
    out = np.zeros((len(x), len(nmax_values)), dtype=np.int64)
    for row, pixels in enumerate(x):
        inst = Instance(pixels)
        frontier = [(-log_collocation(tree.root, tree, inst), 0, tree.root)]
        pushed = 1
        scores, probs = [], []
        while frontier and len(scores) < top:
            neg, _, node = heapq.heappop(frontier)
            scores.append(-neg)
            table = tables.get(node.id)
            if table is None:
                table = tables[node.id] = smoothed_label_probs(node)
            probs.append(table)
            if node.children and len(scores) < top:
                for child, s in zip(node.children,
                                    _children_scores(node, log_root_n, inst.pixels, floor)):
                    heapq.heappush(frontier, (-float(s), pushed, child))
                    pushed += 1
        scores = np.asarray(scores)
        probs = np.stack(probs)
        for col, k in enumerate(nmax_values):
            w = softmax_weights(scores[:k])
            out[row, col] = int(np.argmax(w @ probs[:k]))
    return out


def predict_label(tree: CobwebTree, instance: Instance, n_max: int | None = None) -> int:
    return predict(tree, instance, n_max).label
