"""
Labeled app x permission feature matrices and the operations that shape them:
construction, zero-impact column removal, family filtering, merging and the
stratified train/test split.
"""

import logging
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from src.utils.errors import (
    BadParameter,
    ClassTooSmall,
    EmptyMatrix,
    SchemaError,
    UnknownFeature,
    WidthMismatch,
)


class AppCategory(IntEnum):
    """Class label of an app. Malware is the positive class."""

    BENIGN = 0
    MALWARE = 1

    @property
    def label(self):
        return self.name.lower()

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError as e:
                raise SchemaError(f"unknown label {value!r}, expected benign or malware") from e
        return cls(int(value))


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """
    Binary permission matrix with per-row label, malware family and app id.

    Values are immutable after construction: the arrays are marked read-only.

    Attributes:
        feature_names (tuple): Column names in order.
        rows (numpy.ndarray): uint8 array of shape (apps, features), cells 0/1.
        labels (numpy.ndarray): uint8 array of AppCategory values per row.
        families (tuple): Malware family per row, None for benign or unknown.
        app_ids (tuple): Identifier per row.
    """

    feature_names: tuple
    rows: np.ndarray
    labels: np.ndarray
    families: tuple = None
    app_ids: tuple = None

    def __post_init__(self):
        names = tuple(self.feature_names)
        rows = np.asarray(self.rows, dtype=np.uint8)
        if rows.ndim != 2 and rows.size == 0:
            rows = rows.reshape(0, len(names))
        if rows.ndim != 2 or rows.shape[1] != len(names):
            raise WidthMismatch(f"rows have shape {rows.shape}, expected width {len(names)}")
        if rows.size and rows.max() > 1:
            raise SchemaError("feature cells must be 0 or 1")
        labels = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        if labels.shape[0] != rows.shape[0]:
            raise WidthMismatch(f"{labels.shape[0]} labels for {rows.shape[0]} rows")
        if labels.size and labels.max() > 1:
            raise SchemaError("labels must be benign (0) or malware (1)")
        families = tuple(self.families) if self.families is not None else (None,) * rows.shape[0]
        app_ids = tuple(self.app_ids) if self.app_ids is not None else tuple(
            f"app-{i:06d}" for i in range(rows.shape[0]))
        if len(families) != rows.shape[0] or len(app_ids) != rows.shape[0]:
            raise WidthMismatch("families and app ids must have one entry per row")
        rows.flags.writeable = False
        labels.flags.writeable = False
        for attr, value in (("feature_names", names), ("rows", rows), ("labels", labels),
                            ("families", families), ("app_ids", app_ids)):
            object.__setattr__(self, attr, value)

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (self.feature_names == other.feature_names
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.labels, other.labels)
                and self.families == other.families
                and self.app_ids == other.app_ids)

    __hash__ = None

    @property
    def n_rows(self):
        return self.rows.shape[0]

    @property
    def n_features(self):
        return self.rows.shape[1]

    def class_counts(self):
        """Return (benign rows, malware rows)."""
        malware = int(self.labels.sum())
        return self.n_rows - malware, malware

    def column_index(self, name):
        try:
            return self.feature_names.index(name)
        except ValueError as e:
            raise UnknownFeature(f"feature {name} is not in the matrix") from e

    def subset(self, indices):
        """Rows at the given positions, in the given order."""
        indices = np.asarray(indices, dtype=np.intp)
        return FeatureMatrix(
            self.feature_names,
            self.rows[indices],
            self.labels[indices],
            tuple(self.families[i] for i in indices),
            tuple(self.app_ids[i] for i in indices),
        )

    def select_columns(self, names):
        """Project onto the named columns, in the order given."""
        positions = [self.column_index(name) for name in names]
        return FeatureMatrix(tuple(names), self.rows[:, positions], self.labels, self.families, self.app_ids)


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint train/test row positions of a stratified split."""

    train: tuple
    test: tuple
    seed: object


def build_matrix(vectors, catalog, app_ids=None):
    """
    Stack per-app permission vectors into a matrix in catalog column order.

    Args:
        vectors (list): (vector, label, family) triples; label is an AppCategory or "benign"/"malware".
        catalog (PermissionCatalog): Defines the columns.
        app_ids (list, optional): One identifier per vector.

    Returns:
        FeatureMatrix: len(vectors) x len(catalog) matrix.

    Raises:
        WidthMismatch: If a vector's length differs from the catalog size.
    """
    width = len(catalog)
    rows, labels, families = [], [], []
    for position, (vector, label, family) in enumerate(vectors):
        vector = np.asarray(vector, dtype=np.uint8).reshape(-1)
        if vector.shape[0] != width:
            raise WidthMismatch(f"vector {position} has width {vector.shape[0]}, catalog has {width}")
        rows.append(vector)
        labels.append(AppCategory.parse(label))
        families.append(family or None)
    matrix = FeatureMatrix(
        catalog.names,
        np.vstack(rows) if rows else np.zeros((0, width), dtype=np.uint8),
        np.asarray(labels, dtype=np.uint8),
        tuple(families),
        tuple(app_ids) if app_ids is not None else None,
    )
    logging.info("Built %d x %d feature matrix", matrix.n_rows, matrix.n_features)
    return matrix


def remove_zero_impact(matrix):
    """
    Drop every permission no app in the matrix requests.

    Args:
        matrix (FeatureMatrix): At least one row.

    Returns:
        tuple: (FeatureMatrix with surviving columns in original order, list of removed names)

    Raises:
        EmptyMatrix: If the matrix has no rows.
    """
    if matrix.n_rows == 0:
        raise EmptyMatrix("cannot judge feature impact on an empty matrix")
    used = matrix.rows.sum(axis=0) > 0
    removed = [name for name, keep in zip(matrix.feature_names, used) if not keep]
    survivors = [name for name, keep in zip(matrix.feature_names, used) if keep]
    logging.info("Removed %d zero-impact permissions, %d remain", len(removed), len(survivors))
    return matrix.select_columns(survivors), removed


def filter_families(matrix, keep):
    """Keep every benign row and the malware rows whose family is in keep."""
    keep = set(keep)
    mask = [label == AppCategory.BENIGN or family in keep
            for label, family in zip(matrix.labels, matrix.families)]
    filtered = matrix.subset(np.flatnonzero(mask))
    logging.info("Family filter kept %d of %d rows (%s)", filtered.n_rows, matrix.n_rows,
                 ", ".join(sorted(keep)) or "benign only")
    return filtered


def merge_matrices(matrices):
    """Concatenate matrices that share the same columns."""
    matrices = list(matrices)
    if not matrices:
        raise EmptyMatrix("nothing to merge")
    names = matrices[0].feature_names
    for other in matrices[1:]:
        if other.feature_names != names:
            raise WidthMismatch("matrices to merge must have identical columns")
    return FeatureMatrix(
        names,
        np.vstack([m.rows for m in matrices]),
        np.concatenate([m.labels for m in matrices]),
        sum((m.families for m in matrices), ()),
        sum((m.app_ids for m in matrices), ()),
    )


def align_to_catalog(matrix, catalog):
    """
    Re-order columns to catalog order, filling catalog permissions the matrix lacks with zeros.

    Raises:
        UnknownFeature: If the matrix has a column the catalog does not list.
    """
    unknown = [name for name in matrix.feature_names if catalog.index_of(name) is None]
    if unknown:
        raise UnknownFeature(f"columns not in catalog: {', '.join(unknown)}")
    rows = np.zeros((matrix.n_rows, len(catalog)), dtype=np.uint8)
    for source, name in enumerate(matrix.feature_names):
        rows[:, catalog.index_of(name)] = matrix.rows[:, source]
    return FeatureMatrix(catalog.names, rows, matrix.labels, matrix.families, matrix.app_ids)


def train_size(class_size, train_fraction):
    """Half-up rounded share of a class, kept inside 1..class_size-1."""
    share = math.floor(train_fraction * class_size + 0.5)
    return min(max(share, 1), class_size - 1)


def stratified_split(matrix, train_fraction=0.7, seed=0):
    """
    Per-class seeded shuffle; the first round(fraction x class size) rows of each class train.

    Args:
        matrix (FeatureMatrix): Data to split.
        train_fraction (float): Share of each class used for training, 0 < f < 1.
        seed (int or numpy.random.SeedSequence): Generator seed.

    Returns:
        SplitIndices: Sorted train and test row positions.

    Raises:
        BadParameter: If the fraction is outside (0, 1).
        ClassTooSmall: If a class has fewer than two rows.
    """
    if not 0 < train_fraction < 1:
        raise BadParameter(f"train fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for category in AppCategory:
        members = np.flatnonzero(matrix.labels == category)
        if members.size < 2:
            raise ClassTooSmall(f"class {category.label} has {members.size} rows, at least 2 needed")
        shuffled = rng.permutation(members)
        cut = train_size(members.size, train_fraction)
        train.append(shuffled[:cut])
        test.append(shuffled[cut:])
    split = SplitIndices(
        tuple(int(i) for i in np.sort(np.concatenate(train))),
        tuple(int(i) for i in np.sort(np.concatenate(test))),
        seed,
    )
    logging.info("Split %d rows into %d train / %d test", matrix.n_rows, len(split.train), len(split.test))
    return split
