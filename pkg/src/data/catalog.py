"""
The permission catalog: the ordered list of permissions that make up the
feature columns, with their Android protection level.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import pandas as pd

from src.utils.errors import IoError, SchemaError

DEFAULT_CATALOG_PATH = Path(__file__).with_name("permissions.csv")


class ProtectionLevel(Enum):
    NORMAL = "normal"
    DANGEROUS = "dangerous"
    SIGNATURE = "signature"


@dataclass(frozen=True)
class PermissionCatalog:
    """
    Ordered, duplicate-free list of (name, protection level) entries.

    Names are unqualified (SEND_SMS, not android.permission.SEND_SMS).
    """

    entries: tuple

    def __post_init__(self):
        names = [name for name, _ in self.entries]
        duplicates = sorted(name for name, count in Counter(names).items() if count > 1)
        if duplicates:
            raise SchemaError(f"duplicate catalog entries: {', '.join(duplicates)}")
        object.__setattr__(self, "_positions", {name: i for i, name in enumerate(names)})

    def __len__(self):
        return len(self.entries)

    @property
    def names(self):
        return tuple(name for name, _ in self.entries)

    def index_of(self, name):
        """Column position of an unqualified permission name, or None."""
        return self._positions.get(name)

    def level_counts(self):
        counts = Counter(level for _, level in self.entries)
        return {level: counts.get(level, 0) for level in ProtectionLevel}


def load_catalog(path=None):
    """
    Load a catalog from a CSV file with columns name,level.

    Args:
        path (str, optional): Catalog file; the bundled 94-permission catalog when omitted.

    Returns:
        PermissionCatalog: Catalog in file order.

    Raises:
        IoError: If the file cannot be read.
        SchemaError: If columns are missing or a level is unknown.
    """
    path = Path(path) if path else DEFAULT_CATALOG_PATH
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as e:
        logging.error("Error reading catalog %s: %s", path, e)
        raise IoError(f"cannot read catalog {path}: {e}") from e

    if list(frame.columns[:2]) != ["name", "level"]:
        raise SchemaError(f"catalog {path} must start with columns name,level")
    entries = []
    for name, level in zip(frame["name"], frame["level"]):
        try:
            entries.append((name.strip(), ProtectionLevel(level.strip().lower())))
        except ValueError as e:
            raise SchemaError(f"unknown protection level {level!r} for {name}") from e
    catalog = PermissionCatalog(tuple(entries))
    logging.info("Loaded catalog %s with %d permissions", path, len(catalog))
    return catalog
