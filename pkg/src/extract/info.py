"""
The parsed-manifest value type shared by the binary and text readers.
"""

import logging
from dataclasses import dataclass

ANDROID_NS = "http://schemas.android.com/apk/res/android"
PERMISSION_TAGS = ("uses-permission", "uses-permission-sdk-23")


@dataclass(frozen=True)
class ManifestInfo:
    """
    Permissions declared by one app manifest.

    Attributes:
        package_name (str): Value of the manifest's package attribute, "" if absent.
        declared_permissions (tuple): Fully qualified permission names, first-seen order, no duplicates.
        parse_warnings (tuple): Human-readable notes about recoverable problems.
    """

    package_name: str
    declared_permissions: tuple = ()
    parse_warnings: tuple = ()


class PermissionCollector:
    """Accumulates uses-permission entries with set semantics and warnings."""

    def __init__(self):
        self.package_name = ""
        self.permissions = {}
        self.warnings = []

    def warn(self, message):
        logging.warning("%s", message)
        self.warnings.append(message)

    def add(self, name, line=None):
        where = f" (line {line})" if line is not None else ""
        if not name:
            self.warn(f"uses-permission without android:name skipped{where}")
            return
        if name in self.permissions:
            self.warn(f"duplicate uses-permission {name}{where}")
            return
        self.permissions[name] = None

    def build(self):
        return ManifestInfo(
            package_name=self.package_name,
            declared_permissions=tuple(self.permissions),
            parse_warnings=tuple(self.warnings),
        )
