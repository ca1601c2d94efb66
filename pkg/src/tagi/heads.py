"""Task heads: Gaussian regression output and hierarchical binary classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .infer import ObservationModel
from .net import GaussianVector


def regression_predictive(z: GaussianVector, obs: ObservationModel) -> GaussianVector:
    """Predictive for ``y = z + v``."""
    return GaussianVector(z.mean, z.var + np.asarray(obs.sigma_v, dtype=float) ** 2)


@dataclass(frozen=True)
class HeadConfig:
    alpha: float = 1.0 / 3.0
    sigma_v: float = 0.2

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.sigma_v > 0:
            raise ValueError("sigma_v must be positive")


class ClassTree:
    """Binary tree encoding of ``K`` classes.

    Tree nodes are numbered breadth first (root 0, then its children 1 and 2,
    ...).  Class ``c`` is the leaf reached by reading the ``H`` bits of ``c``
    most significant first, bit 0 meaning the left branch.  When ``K`` is not
    a power of two some leaves are unused, and nodes whose subtree holds no
    used leaf get no output unit; e.g. ``K = 10`` uses 11 of the 15 nodes.
    """

    def __init__(self, num_classes: int):
        if num_classes < 2:
            raise ValueError("need at least two classes")
        self.num_classes = int(num_classes)
        self.depth = max(1, math.ceil(math.log2(self.num_classes)))
        self.num_nodes = 2**self.depth - 1

        path_nodes = np.zeros((self.num_classes, self.depth), dtype=int)
        bits = np.zeros((self.num_classes, self.depth), dtype=int)
        for c in range(self.num_classes):
            node = 0
            for h in range(self.depth):
                bit = (c >> (self.depth - 1 - h)) & 1
                path_nodes[c, h] = node
                bits[c, h] = bit
                node = 2 * node + 1 + bit
        live = np.unique(path_nodes)
        self.live_nodes = live
        self.node_to_unit = {int(n): u for u, n in enumerate(live)}
        self.path_units = np.vectorize(self.node_to_unit.__getitem__)(path_nodes)
        self.path_signs = 1 - 2 * bits  # (-1) ** bit

    @property
    def output_units(self) -> int:
        return len(self.live_nodes)

    @property
    def is_complete(self) -> bool:
        return self.num_classes == 2**self.depth

    def __repr__(self):
        return f"ClassTree(num_classes={self.num_classes}, depth={self.depth}, output_units={self.output_units})"

    def observation(self, labels) -> np.ndarray:
        """Dense targets for labels: +/-1 on path units, NaN elsewhere."""
        labels = np.asarray(labels)
        if np.any((labels < 0) | (labels >= self.num_classes)):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        y = np.full(labels.shape + (self.output_units,), np.nan)
        units = self.path_units[labels]
        signs = self.path_signs[labels].astype(float)
        np.put_along_axis(y, units, signs, axis=-1)
        return y


def class_encode(label: int, tree: ClassTree) -> list[tuple[int, int]]:
    """(output unit, sign) pairs along the label's root-to-leaf path."""
    if not 0 <= label < tree.num_classes:
        raise ValueError(f"label {label} outside [0, {tree.num_classes})")
    return [(int(u), int(s)) for u, s in zip(tree.path_units[label], tree.path_signs[label])]


def class_decode(pairs, tree: ClassTree) -> int:
    """Inverse of :func:`class_encode`: walk the tree following the signs."""
    signs = dict(pairs)
    node = 0
    for _ in range(tree.depth):
        bit = 0 if signs[tree.node_to_unit[node]] > 0 else 1
        node = 2 * node + 1 + bit
    label = node - tree.num_nodes
    if not 0 <= label < tree.num_classes:
        raise ValueError("path leads to an unused leaf")
    return label


def class_marginals(y_pred: GaussianVector, cfg: HeadConfig, tree: ClassTree) -> np.ndarray:
    """Class probabilities with the output uncertainty integrated out.

    Works on batches: ``y_pred`` moments of shape ``(..., output_units)`` give
    probabilities of shape ``(..., num_classes)``.
    """
    mu = np.take(y_pred.mean, tree.path_units, axis=-1)  # (..., K, H)
    var = np.take(y_pred.var, tree.path_units, axis=-1)
    probs = ndtr(tree.path_signs * mu / np.sqrt(cfg.alpha**2 + var)).prod(axis=-1)
    if not tree.is_complete:
        probs = probs / probs.sum(axis=-1, keepdims=True)
    return probs


class Decision(enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    UNKNOWN = "unknown"


def class_decision(probs, phi: float, truth: int) -> Decision:
    probs = np.asarray(probs)
    best = int(np.argmax(probs))  # first maximum, i.e. lowest class id on ties
    if probs[best] < phi:
        return Decision.UNKNOWN
    return Decision.CORRECT if best == truth else Decision.INCORRECT


def decision_fractions(probs, labels, phis) -> np.ndarray:
    """Fractions of correct / incorrect / unknown outcomes for each threshold.

    Returns an array of shape ``(len(phis), 3)``.
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    best = probs.argmax(axis=-1)
    top = probs.max(axis=-1)
    hit = best == labels
    out = []
    for phi in np.atleast_1d(phis):
        known = top >= phi
        out.append([np.mean(known & hit), np.mean(known & ~hit), np.mean(~known)])
    return np.array(out)
