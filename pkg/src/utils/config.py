"""
Run configuration.

Values are resolved from, lowest to highest precedence: built-in defaults, a
key = value config file, the PERMRANK_* environment variables and command
line flags. Every key is declared once in CONFIG_KEYS with its type and valid
range.
"""

import logging
from dataclasses import dataclass, fields

import numpy as np

from src.evaluation.experiment import ExperimentSettings
from src.models.forest import ForestParams
from src.models.svm import KernelType, SvmParams, TuneGrid
from src.models.tree import TreeParams
from src.utils.errors import ConfigError
from src.utils.helpers import get_env_variable

ENV_PREFIX = "PERMRANK_"


def _to_bool(value):
    lowered = str(value).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _optional_int(value):
    if value is None or str(value).strip().lower() in ("", "none", "auto"):
        return None
    return int(value)


def _optional_float(value):
    if value is None or str(value).strip().lower() in ("", "none", "auto"):
        return None
    return float(value)


def _float_list(value):
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    items = tuple(float(v) for v in str(value).split(",") if v.strip())
    if not items:
        raise ValueError("empty list")
    return items


def _positive(value):
    return value is None or value > 0


def _unit_open(value):
    return 0 < value < 1


# key -> (attribute, converter, validator, description of the valid range)
CONFIG_KEYS = {
    "seed": ("seed", _optional_int, lambda v: v is None or 0 <= v < 2 ** 32, "unsigned 32-bit integer"),
    "threads": ("threads", int, lambda v: v >= 1, "integer >= 1"),
    "catalog": ("catalog", str, lambda v: bool(v), "path"),
    "alpha_threshold": ("alpha_threshold", float, _unit_open, "real in (0, 1)"),
    "train_fraction": ("train_fraction", float, _unit_open, "real in (0, 1)"),
    "yates": ("yates", _to_bool, lambda v: True, "boolean"),
    "f_alpha": ("f_alpha", float, _positive, "real > 0"),
    "dt.min_split": ("dt_min_split", int, lambda v: v >= 2, "integer >= 2"),
    "dt.min_leaf": ("dt_min_leaf", int, lambda v: v >= 1, "integer >= 1"),
    "dt.complexity": ("dt_complexity", float, lambda v: v >= 0, "real >= 0"),
    "rf.n_trees": ("rf_n_trees", int, lambda v: v >= 1, "integer >= 1"),
    "rf.mtry": ("rf_mtry", _optional_int, lambda v: v is None or v >= 1, "integer >= 1 or auto"),
    "rf.bootstrap": ("rf_bootstrap", _to_bool, lambda v: True, "boolean"),
    "svm.kernel": ("svm_kernel", KernelType, lambda v: True, "linear or rbf"),
    "svm.cost": ("svm_cost", float, _positive, "real > 0"),
    "svm.gamma": ("svm_gamma", _optional_float, _positive, "real > 0 or auto"),
    "svm.tolerance": ("svm_tolerance", float, _positive, "real > 0"),
    "svm.max_passes": ("svm_max_passes", int, lambda v: v >= 1, "integer >= 1"),
    "svm.cache_mb": ("svm_cache_mb", float, _positive, "real > 0"),
    "tune.costs": ("tune_costs", _float_list, lambda v: all(c > 0 for c in v), "comma-separated reals > 0"),
    "tune.gamma_multipliers": ("tune_gamma_multipliers", _float_list, lambda v: all(g > 0 for g in v),
                               "comma-separated reals > 0"),
    "tune.folds": ("tune_folds", int, lambda v: v >= 2, "integer >= 2"),
}

ENV_KEYS = {"SEED": "seed", "THREADS": "threads"}


@dataclass(frozen=True)
class RunConfig:
    seed: int = None
    threads: int = 1
    catalog: str = None
    alpha_threshold: float = 0.05
    train_fraction: float = 0.7
    yates: bool = False
    f_alpha: float = 1.0
    dt_min_split: int = 20
    dt_min_leaf: int = 7
    dt_complexity: float = 0.01
    rf_n_trees: int = 500
    rf_mtry: int = None
    rf_bootstrap: bool = True
    svm_kernel: KernelType = KernelType.RBF
    svm_cost: float = 1.0
    svm_gamma: float = None
    svm_tolerance: float = 1e-3
    svm_max_passes: int = 100
    svm_cache_mb: float = 100
    tune_costs: tuple = (0.1, 1.0, 10.0, 100.0)
    tune_gamma_multipliers: tuple = (0.5, 1.0, 2.0)
    tune_folds: int = 5

    def tree_params(self):
        return TreeParams(self.dt_min_split, self.dt_min_leaf, self.dt_complexity)

    def forest_params(self):
        return ForestParams(self.rf_n_trees, self.rf_mtry, self.rf_bootstrap, self.seed or 0, self.threads)

    def svm_params(self):
        return SvmParams(self.svm_kernel, self.svm_cost, self.svm_gamma, self.svm_tolerance,
                         self.svm_max_passes, self.svm_cache_mb)

    def tune_grid(self):
        return TuneGrid(self.tune_costs, self.tune_gamma_multipliers)

    def experiment_settings(self):
        return ExperimentSettings(
            train_fraction=self.train_fraction, threshold=self.alpha_threshold, yates=self.yates,
            alpha=self.f_alpha, tree=self.tree_params(), forest=self.forest_params(),
            svm=self.svm_params(), tune_grid=self.tune_grid(), folds=self.tune_folds, n_jobs=self.threads,
        )


def convert(key, value):
    """
    Convert and validate one config value.

    Raises:
        ConfigError: If the key is unknown or the value has the wrong type or range.
    """
    if key not in CONFIG_KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    attribute, converter, validator, expected = CONFIG_KEYS[key]
    try:
        converted = converter(value.strip() if isinstance(value, str) else value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: expected {expected}, got {value!r}") from e
    if converted is not None and not validator(converted):
        raise ConfigError(f"{key}: expected {expected}, got {value!r}")
    return attribute, converted


def read_config_file(path):
    """
    Parse key = value lines; blank lines and # comments are skipped.

    Returns:
        dict: Raw string values by key.
    """
    values = {}
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as e:
        logging.error("Error reading config %s: %s", path, e)
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        if not separator or not key.strip():
            raise ConfigError(f"{path}:{number}: expected key = value")
        values[key.strip()] = value.strip()
    logging.info("Read %d config values from %s", len(values), path)
    return values


def load_config(config_path=None, overrides=None):
    """
    Resolve the run configuration.

    Args:
        config_path (str, optional): Config file from the command line; PERMRANK_CONFIG otherwise.
        overrides (dict, optional): Flag values by config key; None entries are ignored.

    Returns:
        RunConfig: The resolved configuration, with a fresh recorded seed when none was given.

    Raises:
        ConfigError: If a key is unknown or a value is invalid.
    """
    resolved = {}
    config_path = config_path or get_env_variable(f"{ENV_PREFIX}CONFIG", required=False)
    if config_path:
        for key, value in read_config_file(config_path).items():
            attribute, converted = convert(key, value)
            resolved[attribute] = converted

    for suffix, key in ENV_KEYS.items():
        value = get_env_variable(f"{ENV_PREFIX}{suffix}", required=False)
        if value:
            attribute, converted = convert(key, value)
            resolved[attribute] = converted
            logging.info("%s%s (%s) retrieved from the environment.", ENV_PREFIX, suffix, key)

    for key, value in (overrides or {}).items():
        if value is not None:
            attribute, converted = convert(key, value)
            resolved[attribute] = converted

    if resolved.get("seed") is None:
        resolved["seed"] = int(np.random.SeedSequence().entropy % 2 ** 32)
        logging.info("No seed given; using recorded seed %d", resolved["seed"])

    known = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in resolved.items() if k in known})
