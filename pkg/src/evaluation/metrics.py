"""
Confusion counts and the detection-rate metrics derived from them.
Malware is the positive class. Every rate is a percentage.
"""

import logging
from dataclasses import dataclass

from src.data.matrix import AppCategory
from src.utils.errors import EmptyInput, LengthMismatch, MissingClass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsReport:
    """
    Attributes:
        acc, fpr, fnr, tpr, tnr, precision, f_score (float): Percentages in [0, 100].
        alpha (float): Recall weight of the F-score.
        precision_undefined (bool): No row was predicted malware; precision and F-score are reported as 0.
    """

    acc: float
    fpr: float
    fnr: float
    tpr: float
    tnr: float
    precision: float
    f_score: float
    alpha: float = 1.0
    precision_undefined: bool = False


def confusion(predicted, truth):
    """
    Tally predictions against the true labels.

    Args:
        predicted (sequence): Predicted AppCategory values.
        truth (sequence): True AppCategory values.

    Returns:
        ConfusionCounts: The four counts.

    Raises:
        LengthMismatch: If the sequences differ in length.
        EmptyInput: If both are empty.
    """
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth):
        raise LengthMismatch(f"{len(predicted)} predictions for {len(truth)} labels")
    if not truth:
        raise EmptyInput("no predictions to score")
    tp = tn = fp = fn = 0
    for guess, actual in zip(predicted, truth):
        guess_malware = int(guess) == AppCategory.MALWARE
        if int(actual) == AppCategory.MALWARE:
            tp, fn = (tp + 1, fn) if guess_malware else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if guess_malware else (fp, tn + 1)
    return ConfusionCounts(tp, tn, fp, fn)


def f_score(precision, recall, alpha=1.0):
    """Weighted harmonic mean (1 + a^2) P R / (a^2 P + R); 0 when both are 0."""
    weight = alpha * alpha
    denominator = weight * precision + recall
    if denominator == 0:
        return 0.0
    return (1 + weight) * precision * recall / denominator


def metrics(counts, alpha=1.0):
    """
    Compute the seven metrics from confusion counts.

    Args:
        counts (ConfusionCounts): Test-set tallies.
        alpha (float): F-score recall weight; 1 weighs precision and recall equally.

    Returns:
        MetricsReport: Percentages at full precision.

    Raises:
        MissingClass: If the test set lacks malware or benign rows.
    """
    positives = counts.tp + counts.fn
    negatives = counts.tn + counts.fp
    if positives == 0 or negatives == 0:
        raise MissingClass(f"test set has {positives} malware and {negatives} benign rows")
    tpr = 100.0 * counts.tp / positives
    tnr = 100.0 * counts.tn / negatives
    predicted_malware = counts.tp + counts.fp
    undefined = predicted_malware == 0
    if undefined:
        logging.warning("No row predicted malware; precision and F-score reported as 0")
        precision = 0.0
    else:
        precision = 100.0 * counts.tp / predicted_malware
    return MetricsReport(
        acc=100.0 * (counts.tp + counts.tn) / counts.total,
        fpr=100.0 * counts.fp / negatives,
        fnr=100.0 * counts.fn / positives,
        tpr=tpr,
        tnr=tnr,
        precision=precision,
        f_score=0.0 if undefined else f_score(precision, tpr, alpha),
        alpha=alpha,
        precision_undefined=undefined,
    )
