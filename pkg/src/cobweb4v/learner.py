"""Incremental Cobweb learning over pixel tensors.

At each internal node four operators are scored with information-theoretic
category utility: add to the best child, create a new child, merge the two best
children, split the best child. Scores are computed from hypothetical
statistics; nothing is mutated until an operator is chosen.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from cobweb4v.stats import ContractError, label_entropy_rows, pixel_entropy_from_m2
from cobweb4v.tree import CobwebTree, ConceptNode, Instance, merge_children, split_child

ADD, CREATE, MERGE, SPLIT = "add", "create", "merge", "split"
# tie-break order
PREFERENCE = (ADD, CREATE, MERGE, SPLIT)

EXACT_MATCH_TOL = 1e-9


class LearnerDiagnostic(RuntimeError):
    """Restructuring at a node did not settle within its iteration cap."""


@dataclass
class OperatorScores:
    scores: dict
    best: int
    second: Optional[int]
    add_scores: np.ndarray

    @property
    def choice(self) -> str:
        chosen, value = None, -np.inf
        for op in PREFERENCE:
            if op in self.scores and self.scores[op] > value:
                chosen, value = op, self.scores[op]
        return chosen


def _entropies(n, m2, label_counts, floor):
    return pixel_entropy_from_m2(n, m2, floor) + label_entropy_rows(label_counts)


def _onehot(label, n_labels):
    v = np.zeros(n_labels)
    if label is not None:
        v[label] = 1.0
    return v


def score_operators(node: ConceptNode, instance: Instance, sigma_floor: float) -> OperatorScores:
    """Category utility of each applicable operator at internal ``node``."""
    children = node.children
    k = len(children)
    x = instance.pixels
    n_labels = node.labels.counts.shape[0]
    onehot = _onehot(instance.label, n_labels)

    ns = np.array([c.stats.n for c in children], dtype=float)
    means = np.stack([c.stats.mean for c in children])
    m2s = np.stack([c.stats.m2 for c in children])
    lcs = np.stack([c.labels.counts for c in children]).astype(float)

    h_children = _entropies(ns, m2s, lcs, sigma_floor)
    weighted = float(ns @ h_children)

    n = float(node.stats.n)
    n1 = n + 1.0
    d = x - node.stats.mean
    parent_m2_x = node.stats.m2 + d * d * (n / n1)
    h_parent_x = float(_entropies(np.array([n1]), parent_m2_x[None, :],
                                  (node.labels.counts + onehot)[None, :], sigma_floor)[0])

    # each child with the instance folded in
    deltas = x[None, :] - means
    m2_add = m2s + deltas * deltas * (ns / (ns + 1.0))[:, None]
    h_add = _entropies(ns + 1.0, m2_add, lcs + onehot[None, :], sigma_floor)
    add_scores = (h_parent_x - (weighted - ns * h_children + (ns + 1.0) * h_add) / n1) / k

    order = np.argsort(-add_scores, kind="stable")
    best = int(order[0])
    second = int(order[1]) if k > 1 else None
    scores = {ADD: float(add_scores[best])}

    h_single = float(_entropies(np.array([1.0]), np.zeros((1, x.shape[0])),
                                onehot[None, :], sigma_floor)[0])
    scores[CREATE] = (h_parent_x - (weighted + h_single) / n1) / (k + 1)

    if k > 2:
        i, j = best, second
        nij = ns[i] + ns[j]
        dm = means[j] - means[i]
        m_mean = means[i] + dm * (ns[j] / nij)
        m_m2 = m2s[i] + m2s[j] + dm * dm * (ns[i] * ns[j] / nij)
        dx = x - m_mean
        m_m2 = m_m2 + dx * dx * (nij / (nij + 1.0))
        h_m = float(_entropies(np.array([nij + 1.0]), m_m2[None, :],
                               (lcs[i] + lcs[j] + onehot)[None, :], sigma_floor)[0])
        rest = weighted - ns[i] * h_children[i] - ns[j] * h_children[j]
        scores[MERGE] = (h_parent_x - (rest + (nij + 1.0) * h_m) / n1) / (k - 1)

    best_node = children[best]
    if best_node.children:
        # evaluated on the current partition, without the instance
        gc = best_node.children
        g_ns = np.array([c.stats.n for c in gc], dtype=float)
        g_h = _entropies(g_ns, np.stack([c.stats.m2 for c in gc]),
                         np.stack([c.labels.counts for c in gc]).astype(float), sigma_floor)
        h_parent = float(_entropies(np.array([n]), node.stats.m2[None, :],
                                    node.labels.counts[None, :].astype(float), sigma_floor)[0])
        rest = weighted - ns[best] * h_children[best] + float(g_ns @ g_h)
        scores[SPLIT] = (h_parent - rest / n) / (k - 1 + len(gc))

    return OperatorScores(scores, best, second, add_scores)


def _is_exact_match(leaf: ConceptNode, instance: Instance) -> bool:
    if np.any(leaf.stats.m2 > EXACT_MATCH_TOL):
        return False
    if np.any(np.abs(instance.pixels - leaf.stats.mean) >= EXACT_MATCH_TOL):
        return False
    total = leaf.labels.total
    if instance.label is None:
        return total == 0
    return total == leaf.stats.n and leaf.labels.counts[instance.label] == total


def _replace(tree: CobwebTree, parent: Optional[ConceptNode], old: ConceptNode,
             new: ConceptNode) -> None:
    if parent is None:
        tree.root = new
        return
    for i, c in enumerate(parent.children):
        if c is old:
            parent.children[i] = new
            return
    raise ContractError("node not found under its parent")


def ifit(tree: CobwebTree, instance: Instance) -> ConceptNode:
    """Learn one instance; returns the node where it came to rest."""
    n_labels = tree.config.n_labels
    if instance.label is not None and not 0 <= instance.label < n_labels:
        raise ContractError(f"label {instance.label} outside 0..{n_labels - 1}")
    if tree.root is None:
        tree.root = ConceptNode.from_instance(instance, n_labels)
        return tree.root
    if instance.pixels.shape != tree.root.stats.mean.shape:
        raise ContractError(
            f"instance has {instance.pixels.shape[0]} pixels, tree expects "
            f"{tree.root.stats.mean.shape[0]}")

    floor = tree.config.sigma_floor
    parent: Optional[ConceptNode] = None
    node = tree.root
    while True:
        if node.is_leaf():
            if _is_exact_match(node, instance):
                node.absorb(instance)
                return node
            fringe = ConceptNode(node.stats.copy(), node.labels.copy())
            leaf = ConceptNode.from_instance(instance, n_labels)
            fringe.children = [node, leaf]
            fringe.absorb(instance)
            _replace(tree, parent, node, fringe)
            return leaf

        splits, cap = 0, None
        while True:
            ops = score_operators(node, instance, floor)
            op = ops.choice
            if op == SPLIT:
                if cap is None:
                    cap = len(node.children) + node.height()
                splits += 1
                if splits > cap:
                    raise LearnerDiagnostic(
                        f"more than {cap} splits at one node while learning an instance")
                split_child(node, node.children[ops.best])
                continue
            break

        best = node.children[ops.best]
        if op == ADD:
            node.absorb(instance)
            parent, node = node, best
        elif op == CREATE:
            node.absorb(instance)
            leaf = ConceptNode.from_instance(instance, n_labels)
            node.children.append(leaf)
            return leaf
        else:
            node.absorb(instance)
            merged = merge_children(node, best, node.children[ops.second])
            parent, node = node, merged
