"""
2x2 contingency tables of one permission against the class label, and the two
independence tests used to rank permissions: Pearson's chi-square (1 degree
of freedom) and Fisher's exact test (two-sided).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammaln, logsumexp

from src.data.matrix import AppCategory
from src.utils.errors import BadColumn, EmptyMatrix, InvalidTable

# relative slack when comparing point probabilities against the observed table
FISHER_RELATIVE_TOLERANCE = 1e-7


@dataclass(frozen=True)
class ContingencyTable2x2:
    """
    Counts relating one permission to the class label.

    a: malware with the permission, b: malware without it,
    c: benign with the permission, d: benign without it.
    """

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        cells = tuple(int(v) for v in (self.a, self.b, self.c, self.d))
        if min(cells) < 0:
            raise InvalidTable(f"negative cell in {cells}")
        if sum(cells) < 1:
            raise InvalidTable("table holds no observations")
        for name, value in zip("abcd", cells):
            object.__setattr__(self, name, value)

    def __iter__(self):
        return iter((self.a, self.b, self.c, self.d))

    @property
    def n(self):
        return self.a + self.b + self.c + self.d

    def margins(self):
        """(malware, benign, with permission, without permission) totals."""
        return self.a + self.b, self.c + self.d, self.a + self.c, self.b + self.d

    def swap_rows(self):
        return ContingencyTable2x2(self.c, self.d, self.a, self.b)

    def swap_columns(self):
        return ContingencyTable2x2(self.b, self.a, self.d, self.c)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p_value: float
    degenerate: bool = False


def contingency(matrix, column):
    """
    Tally one permission column against the label.

    Args:
        matrix (FeatureMatrix): At least one row.
        column (int): Column position.

    Returns:
        ContingencyTable2x2: The table; a+b equals the malware row count.

    Raises:
        BadColumn: If the column is out of range.
        EmptyMatrix: If the matrix has no rows.
    """
    if not 0 <= column < matrix.n_features:
        raise BadColumn(f"column {column} outside 0..{matrix.n_features - 1}")
    if matrix.n_rows == 0:
        raise EmptyMatrix("cannot tabulate an empty matrix")
    values = matrix.rows[:, column].astype(bool)
    malware = matrix.labels == AppCategory.MALWARE
    a = int(np.count_nonzero(values & malware))
    c = int(np.count_nonzero(values & ~malware))
    n_malware = int(np.count_nonzero(malware))
    return ContingencyTable2x2(a, n_malware - a, c, matrix.n_rows - n_malware - c)


def contingency_tables(matrix):
    """All column tables at once, in column order."""
    if matrix.n_rows == 0:
        raise EmptyMatrix("cannot tabulate an empty matrix")
    malware = matrix.labels == AppCategory.MALWARE
    n_malware = int(np.count_nonzero(malware))
    n_benign = matrix.n_rows - n_malware
    with_malware = matrix.rows[malware].sum(axis=0, dtype=np.int64)
    with_benign = matrix.rows[~malware].sum(axis=0, dtype=np.int64)
    return [
        ContingencyTable2x2(int(a), n_malware - int(a), int(c), n_benign - int(c))
        for a, c in zip(with_malware, with_benign)
    ]


def chi_square_survival(statistic):
    """P(X >= statistic) for X ~ chi-square with 1 degree of freedom, via Q(1/2, x/2)."""
    return float(gammaincc(0.5, statistic / 2.0))


def chi_square_test(table, yates=False):
    """
    Pearson chi-square test of independence on a 2x2 table.

    Args:
        table (ContingencyTable2x2): Observed counts.
        yates (bool): Apply the continuity correction.

    Returns:
        ChiSquareResult: Statistic, p-value and whether a zero margin forced p = 1.
    """
    a, b, c, d = table
    margins = table.margins()
    if 0 in margins:
        logging.debug("Zero margin in %s, chi-square undefined, reporting p = 1", table)
        return ChiSquareResult(0.0, 1.0, True)
    n = table.n
    spread = abs(a * d - b * c)
    denominator = math.prod(margins)
    # integer arithmetic keeps n(ad - bc)^2 exact at corpus scale
    if yates:
        statistic = n * max(0, 2 * spread - n) ** 2 / (4 * denominator)
    else:
        statistic = n * spread ** 2 / denominator
    return ChiSquareResult(statistic, chi_square_survival(statistic))


def fisher_exact_test(table):
    """
    Two-sided Fisher exact test.

    Sums the hypergeometric point probabilities of every table with the
    observed margins that is no more likely than the observed one (within a
    relative 1e-7). Masses are computed in log space with log-gamma and
    normalized over the support, so very large tables stay finite.

    Args:
        table (ContingencyTable2x2): Observed counts.

    Returns:
        float: p-value in [0, 1]; 1 when a zero margin leaves a single attainable table.
    """
    a = table.a
    row1, _, col1, _ = table.margins()
    n = table.n
    low, high = max(0, row1 + col1 - n), min(row1, col1)
    if low == high:
        return 1.0
    support = np.arange(low, high + 1, dtype=float)
    log_mass = -(gammaln(support + 1) + gammaln(row1 - support + 1)
                 + gammaln(col1 - support + 1) + gammaln(n - row1 - col1 + support + 1))
    observed = log_mass[a - low]
    extreme = log_mass <= observed + math.log1p(FISHER_RELATIVE_TOLERANCE)
    p_value = math.exp(logsumexp(log_mass[extreme]) - logsumexp(log_mass))
    return min(1.0, max(0.0, p_value))
