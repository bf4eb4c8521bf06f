"""
Soft-margin support vector machines trained by sequential minimal optimization.

The solver works on the dual

    max  sum(alpha) - 1/2 alpha' Q alpha,   0 <= alpha_i <= cost,  y' alpha = 0,

with Q_ij = y_i y_j K(x_i, x_j). Each iteration picks the maximal violating
pair, solves the two-variable subproblem in closed form and clips it to the
box. Kernel rows are computed on demand and kept in a bounded LRU cache.
Malware maps to +1, benign to -1.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from joblib import Parallel, delayed

from src.data.matrix import AppCategory
from src.models.tree import as_rows
from src.utils.errors import BadParameter, ClassTooSmall, EmptyInput, SingleClass, WidthMismatch

TAU = 1e-12
SUPPORT_THRESHOLD = 1e-12
LABEL_MAP = {AppCategory.MALWARE: 1, AppCategory.BENIGN: -1}


class KernelType(Enum):
    LINEAR = "linear"
    RBF = "rbf"


@dataclass(frozen=True)
class SvmParams:
    """
    Attributes:
        kernel (KernelType): Linear or RBF.
        cost (float): Box constraint, > 0.
        gamma (float, optional): RBF width; 1 / feature count when omitted.
        tolerance (float): Stop once the maximal KKT violation falls to this value.
        max_passes (int): Iteration cap in epochs of one iteration per training row.
        cache_mb (float): Kernel row cache size.
        record_objective (bool): Keep the dual objective after every iteration.
    """

    kernel: KernelType = KernelType.RBF
    cost: float = 1.0
    gamma: float = None
    tolerance: float = 1e-3
    max_passes: int = 100
    cache_mb: float = 100
    record_objective: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kernel", KernelType(self.kernel))
        if not self.cost > 0:
            raise BadParameter(f"cost must be positive, got {self.cost}")
        if self.gamma is not None and not self.gamma > 0:
            raise BadParameter(f"gamma must be positive, got {self.gamma}")
        if not self.tolerance > 0:
            raise BadParameter(f"tolerance must be positive, got {self.tolerance}")
        if self.max_passes < 1:
            raise BadParameter(f"max_passes must be at least 1, got {self.max_passes}")
        if not self.cache_mb > 0:
            raise BadParameter(f"cache_mb must be positive, got {self.cache_mb}")


@dataclass(frozen=True, eq=False)
class SvmModel:
    """
    Trained machine.

    Attributes:
        kernel (KernelType): Kernel used for training.
        gamma (float): RBF width, None for linear.
        cost (float): Box constraint used for training.
        support_vectors (numpy.ndarray): Training rows with alpha > 1e-12.
        alphas (numpy.ndarray): Dual coefficient per support vector.
        sv_labels (numpy.ndarray): +1 / -1 per support vector.
        bias (float): Decision offset.
        n_features (int): Row width the model expects.
        converged (bool): False when the iteration cap stopped training.
        iterations (int): SMO iterations performed.
        objective_trace (tuple): Dual objective per iteration when recorded.
    """

    kernel: KernelType
    gamma: float
    cost: float
    support_vectors: np.ndarray
    alphas: np.ndarray
    sv_labels: np.ndarray
    bias: float
    n_features: int
    converged: bool = True
    iterations: int = 0
    objective_trace: tuple = ()

    label_map = LABEL_MAP

    @property
    def n_support(self):
        return self.alphas.shape[0]

    def weights(self):
        """Primal weight vector of a linear machine."""
        if self.kernel is not KernelType.LINEAR:
            raise BadParameter("weights exist only for the linear kernel")
        return (self.alphas * self.sv_labels) @ self.support_vectors.astype(float)


def kernel_matrix(left, right, kernel, gamma):
    """K(left_i, right_j) for every pair of rows."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    products = left @ right.T
    if kernel is KernelType.LINEAR:
        return products
    distances = (left * left).sum(axis=1)[:, None] + (right * right).sum(axis=1)[None, :] - 2 * products
    return np.exp(-gamma * np.maximum(distances, 0.0))


class KernelCache:
    """On-demand kernel rows over the training set, least recently used evicted first."""

    def __init__(self, rows, kernel, gamma, cache_mb):
        self.rows = np.asarray(rows, dtype=float)
        self.kernel = kernel
        self.gamma = gamma
        self.squared_norms = (self.rows * self.rows).sum(axis=1)
        n_rows = self.rows.shape[0]
        self.capacity = max(2, int(cache_mb * 2 ** 20) // (8 * max(n_rows, 1)))
        self._rows = OrderedDict()
        self.hits = 0
        self.misses = 0

    def diagonal(self):
        if self.kernel is KernelType.LINEAR:
            return self.squared_norms.copy()
        return np.ones(self.rows.shape[0])

    def row(self, index):
        cached = self._rows.get(index)
        if cached is not None:
            self._rows.move_to_end(index)
            self.hits += 1
            return cached
        self.misses += 1
        values = self.rows @ self.rows[index]
        if self.kernel is KernelType.RBF:
            distances = self.squared_norms + self.squared_norms[index] - 2 * values
            values = np.exp(-self.gamma * np.maximum(distances, 0.0))
        self._rows[index] = values
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return values


def _select_pair(alphas, gradient, y, cost):
    """Maximal violating pair (i, j) and the violation m - M."""
    violation = -y * gradient
    upper = ((y > 0) & (alphas < cost)) | ((y < 0) & (alphas > 0))
    lower = ((y > 0) & (alphas > 0)) | ((y < 0) & (alphas < cost))
    if not upper.any() or not lower.any():
        return -1, -1, 0.0
    i = int(np.argmax(np.where(upper, violation, -np.inf)))
    j = int(np.argmin(np.where(lower, violation, np.inf)))
    return i, j, float(violation[i] - violation[j])


def _solve_pair(a_i, a_j, g_i, g_j, q_ii, q_jj, q_ij, same_sign, cost):
    """Closed-form two-variable update clipped to the box."""
    if not same_sign:
        quad = q_ii + q_jj + 2 * q_ij
        if quad <= 0:
            quad = TAU
        delta = (-g_i - g_j) / quad
        diff = a_i - a_j
        a_i += delta
        a_j += delta
        if diff > 0:
            if a_j < 0:
                a_j, a_i = 0.0, diff
        elif a_i < 0:
            a_i, a_j = 0.0, -diff
        if diff > 0:
            if a_i > cost:
                a_i, a_j = cost, cost - diff
        elif a_j > cost:
            a_j, a_i = cost, cost + diff
    else:
        quad = q_ii + q_jj - 2 * q_ij
        if quad <= 0:
            quad = TAU
        delta = (g_i - g_j) / quad
        total = a_i + a_j
        a_i -= delta
        a_j += delta
        if total > cost:
            if a_i > cost:
                a_i, a_j = cost, total - cost
        elif a_j < 0:
            a_j, a_i = 0.0, total
        if total > cost:
            if a_j > cost:
                a_j, a_i = cost, total - cost
        elif a_i < 0:
            a_i, a_j = 0.0, total
    return a_i, a_j


def _offset(alphas, gradient, y, cost):
    """Average y*G over free vectors, or the midpoint of the feasible interval."""
    y_gradient = y * gradient
    at_upper = alphas >= cost
    at_lower = alphas <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        return float(y_gradient[free].mean())
    upper_bound = y_gradient[(at_upper & (y < 0)) | (at_lower & (y > 0))]
    lower_bound = y_gradient[(at_upper & (y > 0)) | (at_lower & (y < 0))]
    ub = upper_bound.min() if upper_bound.size else np.inf
    lb = lower_bound.max() if lower_bound.size else -np.inf
    if np.isinf(ub) or np.isinf(lb):
        return float(ub if np.isfinite(ub) else lb if np.isfinite(lb) else 0.0)
    return float((ub + lb) / 2)


def dual_objective(alphas, gradient):
    """sum(alpha) - 1/2 alpha' Q alpha, using G = Q alpha - 1."""
    return 0.5 * (alphas.sum() - alphas @ gradient)


def smo_solve(rows, y, params, gamma):
    """
    Run the SMO iterations.

    Args:
        rows (numpy.ndarray): Training block.
        y (numpy.ndarray): +1 / -1 targets.
        params (SvmParams): Solver settings.
        gamma (float): Resolved RBF width.

    Returns:
        tuple: (alphas, rho, converged, iterations, objective trace)
    """
    n_rows = y.shape[0]
    cost = float(params.cost)
    cache = KernelCache(rows, params.kernel, gamma, params.cache_mb)
    q_diagonal = cache.diagonal()
    alphas = np.zeros(n_rows)
    gradient = -np.ones(n_rows)
    trace = []
    max_iterations = params.max_passes * max(n_rows, 1)
    converged = False
    iteration = 0

    while iteration < max_iterations:
        i, j, violation = _select_pair(alphas, gradient, y, cost)
        if i < 0 or violation <= params.tolerance:
            converged = True
            break
        q_i = y[i] * y * cache.row(i)
        q_j = y[j] * y * cache.row(j)
        old_i, old_j = alphas[i], alphas[j]
        alphas[i], alphas[j] = _solve_pair(old_i, old_j, gradient[i], gradient[j],
                                           q_diagonal[i], q_diagonal[j], q_i[j], y[i] == y[j], cost)
        gradient += q_i * (alphas[i] - old_i) + q_j * (alphas[j] - old_j)
        iteration += 1
        if params.record_objective:
            trace.append(float(dual_objective(alphas, gradient)))
        if iteration % max(n_rows, 1) == 0:
            logging.debug("SMO epoch %d: violation %.6g", iteration // max(n_rows, 1), violation)

    logging.debug("Kernel cache: %d hits, %d misses", cache.hits, cache.misses)
    return alphas, _offset(alphas, gradient, y, cost), converged, iteration, tuple(trace)


def resolve_gamma(params, n_features):
    if params.kernel is KernelType.LINEAR:
        return None
    return params.gamma if params.gamma is not None else 1.0 / n_features


def svm_train(matrix, params=None):
    """
    Train a soft-margin SVM.

    Args:
        matrix (FeatureMatrix): Training data with both classes.
        params (SvmParams, optional): Kernel and solver settings.

    Returns:
        SvmModel: The model. converged is False when max_passes stopped the solver.

    Raises:
        EmptyInput: If the matrix has no rows or no features.
        SingleClass: If one class is absent.
    """
    params = params or SvmParams()
    if matrix.n_rows == 0 or matrix.n_features == 0:
        raise EmptyInput(f"cannot train an SVM on a {matrix.n_rows} x {matrix.n_features} matrix")
    benign, malware = matrix.class_counts()
    if benign == 0 or malware == 0:
        raise SingleClass(f"SVM training needs both classes, got {benign} benign and {malware} malware rows")

    gamma = resolve_gamma(params, matrix.n_features)
    y = np.where(matrix.labels == AppCategory.MALWARE, 1.0, -1.0)
    alphas, rho, converged, iterations, trace = smo_solve(matrix.rows, y, params, gamma)
    if not converged:
        logging.warning("SMO stopped after %d iterations without meeting tolerance %s",
                        iterations, params.tolerance)

    support = alphas > SUPPORT_THRESHOLD
    model = SvmModel(
        params.kernel, gamma, float(params.cost),
        np.array(matrix.rows[support], dtype=np.uint8),
        alphas[support], y[support], -rho, matrix.n_features,
        converged, iterations, trace,
    )
    logging.info("Trained %s SVM (cost %s, gamma %s): %d support vectors of %d rows, %d iterations",
                 params.kernel.value, params.cost, gamma, model.n_support, matrix.n_rows, iterations)
    return model


def svm_decision(model, data):
    """Signed distance sum(alpha_i y_i K(x_i, x)) + bias for every row."""
    rows = as_rows(data)
    if rows.shape[1] != model.n_features:
        raise WidthMismatch(f"rows have {rows.shape[1]} features, model expects {model.n_features}")
    if model.n_support == 0:
        return np.full(rows.shape[0], model.bias)
    kernel = kernel_matrix(rows, model.support_vectors, model.kernel, model.gamma)
    return kernel @ (model.alphas * model.sv_labels) + model.bias


def svm_predict_matrix(model, data):
    """Positive decisions are malware; zero, negative or no support vectors is benign."""
    decision = svm_decision(model, data)
    if model.n_support == 0:
        return np.zeros(decision.shape[0], dtype=np.uint8)
    return np.where(decision > 0, AppCategory.MALWARE, AppCategory.BENIGN).astype(np.uint8)


def svm_predict(model, row):
    return AppCategory(int(svm_predict_matrix(model, row)[0]))


@dataclass(frozen=True)
class TuneGrid:
    """Cost values and RBF gamma multipliers of 1 / feature count."""

    costs: tuple = (0.1, 1.0, 10.0, 100.0)
    gamma_multipliers: tuple = (0.5, 1.0, 2.0)


def stratified_folds(labels, folds, seed):
    """
    Fold number per row: each class is shuffled, then dealt round-robin.

    Raises:
        BadParameter: If folds < 2.
        ClassTooSmall: If a class has fewer rows than folds.
    """
    if folds < 2:
        raise BadParameter(f"folds must be at least 2, got {folds}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    assignment = np.zeros(labels.shape[0], dtype=np.int64)
    for category in AppCategory:
        members = np.flatnonzero(labels == category)
        if members.size < folds:
            raise ClassTooSmall(f"class {category.label} has {members.size} rows for {folds} folds")
        assignment[rng.permutation(members)] = np.arange(members.size) % folds
    return assignment


def _fold_hits(matrix, assignment, fold, params):
    train = matrix.subset(np.flatnonzero(assignment != fold))
    held_out = matrix.subset(np.flatnonzero(assignment == fold))
    model = svm_train(train, params)
    return int(np.count_nonzero(svm_predict_matrix(model, held_out) == held_out.labels))


def svm_tune(matrix, grid=None, folds=5, seed=0, params=None, n_jobs=1):
    """
    Pick cost (and gamma for RBF) by stratified k-fold cross-validated accuracy.

    Args:
        matrix (FeatureMatrix): Training data.
        grid (TuneGrid, optional): Candidate values.
        folds (int): Number of folds, >= 2.
        seed (int): Fold assignment seed.
        params (SvmParams, optional): Base settings; kernel and solver limits are kept.
        n_jobs (int): Worker threads over (grid point, fold) units.

    Returns:
        SvmParams: Base settings with the winning cost and gamma. Ties go to
        the smaller cost, then the smaller gamma.
    """
    grid = grid or TuneGrid()
    params = params or SvmParams()
    benign, malware = matrix.class_counts()
    if benign == 0 or malware == 0:
        raise SingleClass("SVM tuning needs both classes")
    assignment = stratified_folds(matrix.labels, folds, seed)

    if params.kernel is KernelType.LINEAR:
        gammas = [None]
    else:
        gammas = sorted(m / matrix.n_features for m in grid.gamma_multipliers)
    candidates = [replace(params, cost=float(cost), gamma=gamma)
                  for cost in sorted(grid.costs) for gamma in gammas]
    units = [(candidate, fold) for candidate in candidates for fold in range(folds)]
    if n_jobs == 1:
        hits = [_fold_hits(matrix, assignment, fold, candidate) for candidate, fold in units]
    else:
        hits = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_fold_hits)(matrix, assignment, fold, candidate) for candidate, fold in units)

    scores = [sum(hits[k * folds:(k + 1) * folds]) for k in range(len(candidates))]
    for candidate, score in zip(candidates, scores):
        logging.debug("cost %s gamma %s: accuracy %.4f", candidate.cost, candidate.gamma, score / matrix.n_rows)
    # candidates are ordered by (cost, gamma), so the first maximum wins ties
    best = int(np.argmax(scores))
    logging.info("Tuned SVM: cost %s, gamma %s, cross-validated accuracy %.4f",
                 candidates[best].cost, candidates[best].gamma, scores[best] / matrix.n_rows)
    return candidates[best]
