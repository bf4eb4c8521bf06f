"""
CART decision trees over binary permission features.

Every split is an equality test on one permission bit: rows without the
permission go left, rows with it go right. Splits are chosen greedily by Gini
impurity decrease, with the decrease weighted by the node's share of the
training rows and compared against complexity x root impurity.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.data.matrix import AppCategory
from src.utils.errors import BadParameter, EmptyInput, WidthMismatch

# decreases within this margin of the complexity threshold do not split
SPLIT_EPSILON = 1e-12


@dataclass(frozen=True)
class Leaf:
    label: AppCategory
    class_counts: tuple


@dataclass(frozen=True)
class Split:
    feature: int
    left: object
    right: object


@dataclass(frozen=True)
class TreeParams:
    """
    Growth limits.

    Attributes:
        min_split (int): Nodes with fewer rows become leaves.
        min_leaf (int): Smallest child a split may produce.
        complexity (float): Minimum weighted impurity decrease, as a share of root impurity.
    """

    min_split: int = 20
    min_leaf: int = 7
    complexity: float = 0.01

    def __post_init__(self):
        if self.min_split < 2:
            raise BadParameter(f"min_split must be at least 2, got {self.min_split}")
        if self.min_leaf < 1:
            raise BadParameter(f"min_leaf must be at least 1, got {self.min_leaf}")
        if self.complexity < 0:
            raise BadParameter(f"complexity must be non-negative, got {self.complexity}")


def majority(benign, malware):
    """Majority class; ties go to benign."""
    return AppCategory.MALWARE if malware > benign else AppCategory.BENIGN


def gini(benign, malware):
    n = benign + malware
    if n == 0:
        return 0.0
    return 1.0 - (benign * benign + malware * malware) / (n * n)


class _TreeGrower:
    """Recursive greedy growth over one training sample."""

    def __init__(self, rows, labels, params, candidate_sampler=None):
        self.rows = rows
        self.labels = labels
        self.params = params
        self.candidate_sampler = candidate_sampler
        self.root_size = labels.shape[0]
        malware = int(labels.sum())
        self.threshold = params.complexity * gini(self.root_size - malware, malware)
        self.n_splits = 0

    def candidates(self):
        n_features = self.rows.shape[1]
        if self.candidate_sampler is None:
            return np.arange(n_features)
        return self.candidate_sampler(n_features)

    def grow(self, members):
        labels = self.labels[members]
        n = members.shape[0]
        malware = int(labels.sum())
        benign = n - malware
        leaf = Leaf(majority(benign, malware), (benign, malware))
        if benign == 0 or malware == 0 or n < self.params.min_split:
            return leaf

        candidates = self.candidates()
        block = self.rows[np.ix_(members, candidates)]
        ones = block.sum(axis=0, dtype=np.int64)
        malware_ones = block[labels == AppCategory.MALWARE].sum(axis=0, dtype=np.int64)
        zeros = n - ones
        malware_zeros = malware - malware_ones
        benign_ones = ones - malware_ones
        benign_zeros = zeros - malware_zeros

        with np.errstate(divide="ignore", invalid="ignore"):
            purity = (np.where(ones > 0, (benign_ones ** 2 + malware_ones ** 2) / ones, 0.0)
                      + np.where(zeros > 0, (benign_zeros ** 2 + malware_zeros ** 2) / zeros, 0.0))
        # node impurity minus weighted child impurity, scaled by n / root rows
        decrease = (purity - (benign * benign + malware * malware) / n) / self.root_size
        feasible = (ones >= self.params.min_leaf) & (zeros >= self.params.min_leaf)
        decrease = np.where(feasible, decrease, -np.inf)

        best = int(np.argmax(decrease))
        if decrease[best] <= self.threshold + SPLIT_EPSILON:
            return leaf

        feature = int(candidates[best])
        goes_right = block[:, best].astype(bool)
        self.n_splits += 1
        logging.debug("Split on feature %d: %d left, %d right, decrease %.6f",
                      feature, n - int(ones[best]), int(ones[best]), decrease[best])
        return Split(feature, self.grow(members[~goes_right]), self.grow(members[goes_right]))


def grow_tree(rows, labels, params, candidate_sampler=None):
    """
    Grow a tree on raw arrays.

    Args:
        rows (numpy.ndarray): uint8 (n, p) feature block.
        labels (numpy.ndarray): AppCategory values per row.
        params (TreeParams): Growth limits.
        candidate_sampler (callable, optional): Maps the feature count to the
            sorted column positions considered at one node; all columns when omitted.

    Returns:
        Leaf or Split: Root node.
    """
    rows = np.asarray(rows, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    grower = _TreeGrower(rows, labels, params, candidate_sampler)
    return grower.grow(np.arange(labels.shape[0]))


def dt_train(matrix, params=None):
    """
    Train a single CART tree.

    Args:
        matrix (FeatureMatrix): Training data.
        params (TreeParams, optional): Growth limits; defaults apply when omitted.

    Returns:
        Leaf or Split: Root of the trained tree.

    Raises:
        EmptyInput: If the matrix has no rows or no features.
    """
    params = params or TreeParams()
    if matrix.n_rows == 0 or matrix.n_features == 0:
        raise EmptyInput(f"cannot train a tree on a {matrix.n_rows} x {matrix.n_features} matrix")
    tree = grow_tree(matrix.rows, matrix.labels, params)
    logging.info("Trained decision tree: %d nodes, depth %d, on %d rows",
                 node_count(tree), depth(tree), matrix.n_rows)
    return tree


def node_count(node):
    if isinstance(node, Leaf):
        return 1
    return 1 + node_count(node.left) + node_count(node.right)


def depth(node):
    if isinstance(node, Leaf):
        return 0
    return 1 + max(depth(node.left), depth(node.right))


def required_width(node):
    """Smallest row width the tree can route: highest split feature + 1."""
    if isinstance(node, Leaf):
        return 0
    return max(node.feature + 1, required_width(node.left), required_width(node.right))


def as_rows(data):
    """2-D uint8 view of a FeatureMatrix or array-like."""
    rows = getattr(data, "rows", data)
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    return rows


def dt_predict(tree, row):
    """
    Classify one binary vector by walking from the root to a leaf.

    Raises:
        WidthMismatch: If the row is narrower than the features the tree tests.
    """
    row = np.asarray(row).reshape(-1)
    width = required_width(tree)
    if row.shape[0] < width:
        raise WidthMismatch(f"row has {row.shape[0]} features, tree needs {width}")
    node = tree
    while isinstance(node, Split):
        node = node.right if row[node.feature] else node.left
    return node.label


def _route(node, rows, positions, out):
    if isinstance(node, Leaf):
        out[positions] = node.label
        return
    bits = rows[positions, node.feature].astype(bool)
    _route(node.left, rows, positions[~bits], out)
    _route(node.right, rows, positions[bits], out)


def dt_predict_matrix(tree, data):
    """
    Classify every row of a matrix.

    Returns:
        numpy.ndarray: uint8 AppCategory values, one per row.
    """
    rows = as_rows(data)
    width = required_width(tree)
    if rows.shape[1] < width:
        raise WidthMismatch(f"rows have {rows.shape[1]} features, tree needs {width}")
    out = np.zeros(rows.shape[0], dtype=np.uint8)
    _route(tree, rows, np.arange(rows.shape[0]), out)
    return out
