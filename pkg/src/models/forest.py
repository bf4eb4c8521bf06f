"""
Random forests of CART trees: bootstrap samples, a fresh random candidate
feature subset at every node, trees grown to purity and an unweighted vote.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from src.data.matrix import AppCategory
from src.models.tree import TreeParams, as_rows, dt_predict, dt_predict_matrix, grow_tree
from src.utils.errors import BadMtry, BadParameter, EmptyInput

# forest members stop only at purity
FOREST_TREE_PARAMS = TreeParams(min_split=2, min_leaf=1, complexity=0.0)


def default_mtry(n_features):
    return max(1, math.isqrt(n_features))


@dataclass(frozen=True)
class ForestParams:
    """
    Attributes:
        n_trees (int): Number of trees.
        mtry (int, optional): Candidate features per node; floor(sqrt(p)) when omitted.
        bootstrap (bool): Sample rows with replacement for each tree.
        seed (int): Root seed; tree t draws from child stream t.
        n_jobs (int): Worker threads; results do not depend on it.
    """

    n_trees: int = 500
    mtry: int = None
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise BadParameter(f"n_trees must be at least 1, got {self.n_trees}")


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    n_trees: int
    mtry: int
    seed: int
    bootstrap: bool


def _grow_member(rows, labels, seed_sequence, mtry, bootstrap):
    rng = np.random.default_rng(seed_sequence)
    n_rows = labels.shape[0]
    sample = rng.integers(0, n_rows, size=n_rows) if bootstrap else np.arange(n_rows)

    def sample_candidates(n_features):
        return np.sort(rng.choice(n_features, size=mtry, replace=False))

    return grow_tree(rows[sample], labels[sample], FOREST_TREE_PARAMS, sample_candidates)


def rf_train(matrix, params=None):
    """
    Train a random forest.

    Args:
        matrix (FeatureMatrix): Training data.
        params (ForestParams, optional): Forest settings.

    Returns:
        ForestModel: The trained forest; identical for identical (data, params) whatever n_jobs is.

    Raises:
        EmptyInput: If the matrix has no rows or no features.
        BadMtry: If mtry is outside 1..feature count.
    """
    params = params or ForestParams()
    if matrix.n_rows == 0 or matrix.n_features == 0:
        raise EmptyInput(f"cannot train a forest on a {matrix.n_rows} x {matrix.n_features} matrix")
    mtry = default_mtry(matrix.n_features) if params.mtry is None else params.mtry
    if not 1 <= mtry <= matrix.n_features:
        raise BadMtry(f"mtry {mtry} outside 1..{matrix.n_features}")

    streams = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    rows, labels = matrix.rows, matrix.labels
    if params.n_jobs == 1:
        trees = [_grow_member(rows, labels, stream, mtry, params.bootstrap) for stream in streams]
    else:
        trees = Parallel(n_jobs=params.n_jobs, prefer="threads")(
            delayed(_grow_member)(rows, labels, stream, mtry, params.bootstrap) for stream in streams)

    logging.info("Trained random forest: %d trees, mtry %d, bootstrap %s, on %d rows",
                 params.n_trees, mtry, params.bootstrap, matrix.n_rows)
    return ForestModel(tuple(trees), params.n_trees, mtry, params.seed, params.bootstrap)


def _vote(malware_votes, n_trees):
    return AppCategory.MALWARE if 2 * malware_votes > n_trees else AppCategory.BENIGN


def rf_predict(forest, row):
    """Majority vote of the trees; an exact tie is benign."""
    votes = sum(int(dt_predict(tree, row)) for tree in forest.trees)
    return _vote(votes, len(forest.trees))


def rf_predict_matrix(forest, data):
    """Vote for every row of a matrix; returns uint8 AppCategory values."""
    rows = as_rows(data)
    votes = np.zeros(rows.shape[0], dtype=np.int64)
    for tree in forest.trees:
        votes += dt_predict_matrix(tree, rows)
    return np.where(2 * votes > len(forest.trees), AppCategory.MALWARE, AppCategory.BENIGN).astype(np.uint8)
