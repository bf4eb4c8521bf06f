"""
CSV serialization of feature matrices.

Layout: app_id, one 0/1 column per permission, family (empty for benign), label
(benign/malware). Header row mandatory, UTF-8, "\\n" line endings.
"""

import logging

import numpy as np
import pandas as pd

from src.data.matrix import AppCategory, FeatureMatrix
from src.utils.errors import IoError, SchemaError
from src.utils.helpers import open_output

ID_COLUMN = "app_id"
FAMILY_COLUMN = "family"
LABEL_COLUMN = "label"


def read_csv(path):
    """
    Load a feature matrix from CSV.

    Args:
        path (str): CSV file.

    Returns:
        FeatureMatrix: The matrix.

    Raises:
        IoError: If the file cannot be read.
        SchemaError: If the layout is wrong or a cell is not 0/1.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except OSError as e:
        logging.error("Error reading matrix %s: %s", path, e)
        raise IoError(f"cannot read {path}: {e}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SchemaError(f"{path} is not a readable CSV file: {e}") from e

    columns = list(frame.columns)
    if LABEL_COLUMN not in columns:
        raise SchemaError(f"{path} has no {LABEL_COLUMN} column")
    if len(columns) < 3 or columns[0] != ID_COLUMN or columns[-2:] != [FAMILY_COLUMN, LABEL_COLUMN]:
        raise SchemaError(f"{path} must have columns {ID_COLUMN}, <permissions...>, {FAMILY_COLUMN}, {LABEL_COLUMN}")

    features = frame[columns[1:-2]]
    invalid = ~features.isin(["0", "1"])
    if invalid.to_numpy().any():
        row, column = np.argwhere(invalid.to_numpy())[0]
        raise SchemaError(f"{path}: non-binary value {features.iat[row, column]!r} "
                          f"in column {features.columns[column]}, row {row + 1}")

    matrix = FeatureMatrix(
        tuple(columns[1:-2]),
        features.astype(np.uint8).to_numpy(),
        np.asarray([AppCategory.parse(label) for label in frame[LABEL_COLUMN]], dtype=np.uint8),
        tuple(family or None for family in frame[FAMILY_COLUMN]),
        tuple(frame[ID_COLUMN]),
    )
    logging.info("Read %d x %d matrix from %s", matrix.n_rows, matrix.n_features, path)
    return matrix


def write_csv(matrix, path):
    """
    Write a feature matrix as CSV; path "-" writes to standard output.

    Raises:
        IoError: If the destination cannot be written.
    """
    frame = pd.DataFrame(matrix.rows, columns=list(matrix.feature_names))
    frame.insert(0, ID_COLUMN, list(matrix.app_ids))
    frame[FAMILY_COLUMN] = [family or "" for family in matrix.families]
    frame[LABEL_COLUMN] = [AppCategory(label).label for label in matrix.labels]
    try:
        with open_output(path) as handle:
            frame.to_csv(handle, index=False, lineterminator="\n")
    except OSError as e:
        logging.error("Error writing matrix %s: %s", path, e)
        raise IoError(f"cannot write {path}: {e}") from e
    logging.info("Wrote %d x %d matrix to %s", matrix.n_rows, matrix.n_features, path)
