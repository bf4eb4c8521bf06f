"""
The experiment matrix: every dataset x feature set x classifier combination
is trained on a seeded stratified split, scored on the held-out part and
timed. Rows come back in a canonical order whatever the input order.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import pandas as pd

from src.data.matrix import remove_zero_impact, stratified_split
from src.evaluation.metrics import confusion, metrics
from src.evaluation.timing import timed
from src.models.forest import ForestParams, rf_predict_matrix, rf_train
from src.models.svm import SvmParams, TuneGrid, svm_predict_matrix, svm_train, svm_tune
from src.models.tree import TreeParams, dt_predict_matrix, dt_train
from src.ranking.selection import DEFAULT_THRESHOLD, apply_filter, rank_features
from src.utils.errors import BadParameter, IoError
from src.utils.helpers import format_fixed, open_output, round_half_up, substream_int

REPORT_COLUMNS = ["dataset", "feature_set", "classifier", "tuned", "acc", "fpr", "fnr", "tpr", "tnr",
                  "precision", "f_score", "user_s", "system_s", "elapsed_s"]
METRIC_COLUMNS = ["acc", "fpr", "fnr", "tpr", "tnr", "precision", "f_score"]
TIMING_COLUMNS = ["user_s", "system_s", "elapsed_s"]
REPORT_SCHEMA_VERSION = 1


class FeatureSetKind(Enum):
    """none: every column; relevant: zero-impact columns removed; chi2/fisher: relevant columns passing the test."""

    NONE = "none"
    RELEVANT = "relevant"
    CHI_SQUARE = "chi2"
    FISHER_EXACT = "fisher"


FEATURE_SET_ORDER = list(FeatureSetKind)
CLASSIFIER_ORDER = ["dt", "rf", "svm"]


@dataclass(frozen=True)
class ClassifierSpec:
    name: str
    tuned: bool = False

    def __post_init__(self):
        if self.name not in CLASSIFIER_ORDER:
            raise BadParameter(f"unknown classifier {self.name!r}, expected one of {', '.join(CLASSIFIER_ORDER)}")
        if self.tuned and self.name != "svm":
            raise BadParameter("only the SVM has a tuned variant")


DEFAULT_CLASSIFIERS = (ClassifierSpec("dt"), ClassifierSpec("rf"), ClassifierSpec("svm"),
                       ClassifierSpec("svm", tuned=True))


@dataclass(frozen=True)
class ExperimentSettings:
    """Everything besides the data and the seed that shapes an experiment run."""

    train_fraction: float = 0.7
    threshold: float = DEFAULT_THRESHOLD
    yates: bool = False
    alpha: float = 1.0
    tree: TreeParams = field(default_factory=TreeParams)
    forest: ForestParams = field(default_factory=ForestParams)
    svm: SvmParams = field(default_factory=SvmParams)
    tune_grid: TuneGrid = field(default_factory=TuneGrid)
    folds: int = 5
    n_jobs: int = 1


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    feature_set: FeatureSetKind
    n_features: int
    classifier: str
    tuned: bool
    metrics: object
    timing: object

    def sort_key(self):
        return (self.dataset, FEATURE_SET_ORDER.index(self.feature_set),
                CLASSIFIER_ORDER.index(self.classifier), self.tuned)

    @property
    def feature_set_label(self):
        return f"{self.n_features} ({self.feature_set.value})"


def feature_sets(matrix, kinds, settings):
    """
    Build the requested feature-set variants of one dataset.

    Ranking runs on the whole dataset, before the split.

    Returns:
        dict: FeatureSetKind -> FeatureMatrix
    """
    variants = {}
    relevant = None
    for kind in kinds:
        kind = FeatureSetKind(kind)
        if kind is FeatureSetKind.NONE:
            variants[kind] = matrix
            continue
        if relevant is None:
            relevant, _ = remove_zero_impact(matrix)
        if kind is FeatureSetKind.RELEVANT:
            variants[kind] = relevant
        else:
            ranked = rank_features(relevant, kind.value, settings.threshold, settings.yates, settings.n_jobs)
            variants[kind] = apply_filter(relevant, ranked)
    return variants


def _fit_and_predict(classifier, train, test, settings, row_seed):
    if classifier.name == "dt":
        return dt_predict_matrix(dt_train(train, settings.tree), test)
    if classifier.name == "rf":
        forest = rf_train(train, replace(settings.forest, seed=row_seed, n_jobs=settings.n_jobs))
        return rf_predict_matrix(forest, test)
    params = settings.svm
    if classifier.tuned:
        params = svm_tune(train, settings.tune_grid, settings.folds, row_seed, params, settings.n_jobs)
    return svm_predict_matrix(svm_train(train, params), test)


def run_experiment_matrix(datasets, feature_set_specs, classifiers, seed, settings=None):
    """
    Train and score every combination.

    Args:
        datasets (dict): Dataset name -> FeatureMatrix.
        feature_set_specs (sequence): FeatureSetKind values or their names.
        classifiers (sequence): ClassifierSpec entries.
        seed (int): Run seed; the split is keyed by (seed, dataset), each row by (seed, row).
        settings (ExperimentSettings, optional): Split, ranking and model settings.

    Returns:
        list: ReportRow entries sorted by dataset, feature set, classifier, tuned.
    """
    settings = settings or ExperimentSettings()
    kinds = sorted({FeatureSetKind(k) for k in feature_set_specs}, key=FEATURE_SET_ORDER.index)
    classifiers = sorted(set(classifiers), key=lambda c: (CLASSIFIER_ORDER.index(c.name), c.tuned))
    rows = []
    for name in sorted(datasets):
        matrix = datasets[name]
        split = stratified_split(matrix, settings.train_fraction, substream_int(seed, "split", name))
        for kind, variant in feature_sets(matrix, kinds, settings).items():
            train, test = variant.subset(split.train), variant.subset(split.test)
            for classifier in classifiers:
                row_seed = substream_int(seed, "row", name, kind.value, classifier.name, classifier.tuned)
                predicted, timing = timed(_fit_and_predict, classifier, train, test, settings, row_seed)
                report = metrics(confusion(predicted, test.labels), settings.alpha)
                rows.append(ReportRow(name, kind, variant.n_features, classifier.name, classifier.tuned,
                                      report, timing))
                logging.info("%s / %s / %s%s: acc %.2f, F %.2f, %.3fs",
                             name, kind.value, classifier.name, " (tuned)" if classifier.tuned else "",
                             report.acc, report.f_score, timing.elapsed_s)
    return sorted(rows, key=ReportRow.sort_key)


def report_frame(rows, include_timing=True):
    records = []
    for row in rows:
        record = [row.dataset, row.feature_set_label, row.classifier, "true" if row.tuned else "false"]
        record.extend(format_fixed(getattr(row.metrics, column)) for column in METRIC_COLUMNS)
        record.extend(format_fixed(getattr(row.timing, column), 3) if include_timing else ""
                      for column in TIMING_COLUMNS)
        records.append(record)
    return pd.DataFrame(records, columns=REPORT_COLUMNS)


def write_report_csv(rows, path, include_timing=True, seed=None):
    """
    Write the report table. Percentages have two decimals, rounded half-up.

    Args:
        rows (list): ReportRow entries.
        path (str): Destination; "-" is standard output.
        include_timing (bool): Leave timing cells empty when False.
        seed (int, optional): Run seed, written as a leading "# seed=N" line so the run can be replayed.
    """
    try:
        with open_output(path) as handle:
            if seed is not None:
                handle.write(f"# seed={seed}\n")
            report_frame(rows, include_timing).to_csv(handle, index=False, lineterminator="\n")
    except OSError as e:
        logging.error("Error writing report %s: %s", path, e)
        raise IoError(f"cannot write {path}: {e}") from e


def report_document(rows, seed, include_timing=True):
    documents = []
    for row in rows:
        document = {"dataset": row.dataset, "feature_set": row.feature_set_label,
                    "classifier": row.classifier, "tuned": row.tuned}
        document.update({column: round_half_up(getattr(row.metrics, column)) for column in METRIC_COLUMNS})
        document.update({column: round_half_up(getattr(row.timing, column), 3) if include_timing else None
                         for column in TIMING_COLUMNS})
        documents.append(document)
    return {"schema_version": REPORT_SCHEMA_VERSION, "seed": seed, "columns": REPORT_COLUMNS, "rows": documents}


def write_report_json(rows, path, seed, include_timing=True):
    """Write the report as {"schema_version", "seed", "columns", "rows"}."""
    try:
        with open_output(path) as handle:
            json.dump(report_document(rows, seed, include_timing), handle, indent=2)
            handle.write("\n")
    except OSError as e:
        logging.error("Error writing report %s: %s", path, e)
        raise IoError(f"cannot write {path}: {e}") from e
