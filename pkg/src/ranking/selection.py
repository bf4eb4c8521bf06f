"""
Feature ranking and filtering: score every permission with a test of
independence from the label, sort by p-value and keep those at or below the
significance threshold.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import pandas as pd
from joblib import Parallel, delayed

from src.ranking.statistics import chi_square_test, contingency_tables, fisher_exact_test
from src.utils.errors import BadColumn, IoError, SingleClass, UnknownFeature
from src.utils.helpers import format_p_value, open_output

DEFAULT_THRESHOLD = 0.05
REPORT_COLUMNS = ["permission", "statistic", "p_value", "kept"]


class RankingMethod(Enum):
    CHI_SQUARE = "chi2"
    FISHER_EXACT = "fisher"


@dataclass(frozen=True)
class RankedFeature:
    """
    Test outcome for one permission.

    statistic is None for Fisher's exact test. kept is p_value <= threshold.
    """

    name: str
    statistic: object
    p_value: float
    kept: bool
    degenerate: bool = False


def _score(table, method, yates):
    if method is RankingMethod.CHI_SQUARE:
        result = chi_square_test(table, yates=yates)
        return result.statistic, result.p_value, result.degenerate
    return None, fisher_exact_test(table), 0 in table.margins()


def rank_features(matrix, method, threshold=DEFAULT_THRESHOLD, yates=False, n_jobs=1):
    """
    Rank permissions by association with the label.

    Args:
        matrix (FeatureMatrix): At least one feature, both classes present.
        method (RankingMethod or str): "chi2" or "fisher".
        threshold (float): Inclusive p-value cut-off for the kept flag.
        yates (bool): Continuity correction for the chi-square test.
        n_jobs (int): Worker threads for the per-column tests.

    Returns:
        list: RankedFeature entries, ascending p-value, ties in column order.

    Raises:
        SingleClass: If one class is absent.
        BadColumn: If the matrix has no features.
    """
    method = RankingMethod(method)
    if matrix.n_features == 0:
        raise BadColumn("matrix has no features to rank")
    benign, malware = matrix.class_counts()
    if benign == 0 or malware == 0:
        raise SingleClass(f"ranking needs both classes, got {benign} benign and {malware} malware rows")

    tables = contingency_tables(matrix)
    if n_jobs == 1:
        scores = [_score(table, method, yates) for table in tables]
    else:
        scores = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_score)(table, method, yates) for table in tables)

    features = [
        RankedFeature(name, statistic, p_value, p_value <= threshold, degenerate)
        for name, (statistic, p_value, degenerate) in zip(matrix.feature_names, scores)
    ]
    order = sorted(range(len(features)), key=lambda i: (features[i].p_value, i))
    ranked = [features[i] for i in order]
    logging.info("%s ranking kept %d of %d permissions at p <= %s",
                 method.value, sum(f.kept for f in ranked), len(ranked), threshold)
    for feature in ranked:
        logging.debug("%s p=%s kept=%s", feature.name, format_p_value(feature.p_value), feature.kept)
    return ranked


def apply_filter(matrix, ranked):
    """
    Restrict a matrix to the kept features, preserving column order.

    Raises:
        UnknownFeature: If a ranked name is not a column of the matrix.
    """
    present = set(matrix.feature_names)
    missing = [feature.name for feature in ranked if feature.name not in present]
    if missing:
        raise UnknownFeature(f"ranked features not in matrix: {', '.join(missing)}")
    kept = {feature.name for feature in ranked if feature.kept}
    filtered = matrix.select_columns([name for name in matrix.feature_names if name in kept])
    logging.info("Filtered matrix from %d to %d columns", matrix.n_features, filtered.n_features)
    return filtered


def ranking_frame(ranked):
    return pd.DataFrame(
        [[feature.name,
          "" if feature.statistic is None else f"{feature.statistic:.4f}",
          format_p_value(feature.p_value),
          "true" if feature.kept else "false"] for feature in ranked],
        columns=REPORT_COLUMNS,
    )


def write_ranking_csv(ranked, path):
    """Write the ranking report (permission,statistic,p_value,kept); "-" is standard output."""
    try:
        with open_output(path) as handle:
            ranking_frame(ranked).to_csv(handle, index=False, lineterminator="\n")
    except OSError as e:
        logging.error("Error writing ranking %s: %s", path, e)
        raise IoError(f"cannot write {path}: {e}") from e
