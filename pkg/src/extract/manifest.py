"""
Text-side manifest reading, format sniffing and the projection of declared
permissions onto a permission catalog.
"""

import logging
import re

import numpy as np
from lxml import etree

from src.extract.axml import AXML_MAGIC, parse_axml
from src.extract.info import ANDROID_NS, PERMISSION_TAGS, PermissionCollector
from src.utils.errors import EmptyInput, IoError, XmlSyntax


def _with_android_namespace(text):
    # apktool output always declares the prefix; hand-written manifests often do not
    if "xmlns:android" in text or "android:" not in text:
        return text
    return re.sub(r"<manifest\b", f'<manifest xmlns:android="{ANDROID_NS}"', text, count=1)


def parse_plain_xml(text):
    """
    Parse a textual AndroidManifest.xml.

    Args:
        text (str): Manifest markup.

    Returns:
        ManifestInfo: Package name and declared permissions.

    Raises:
        XmlSyntax: If the markup is malformed or the root is not <manifest>.
    """
    parser = etree.XMLParser(resolve_entities=False, no_network=True)
    try:
        root = etree.fromstring(_with_android_namespace(text).encode("utf-8"), parser)
    except etree.XMLSyntaxError as e:
        logging.error("Malformed manifest markup: %s", e)
        raise XmlSyntax(f"malformed manifest markup: {e}") from e

    root_name = etree.QName(root).localname
    if root_name != "manifest":
        raise XmlSyntax(f"root element is <{root_name}>, expected <manifest>")

    collector = PermissionCollector()
    collector.package_name = root.get("package", "")
    for element in root.iter(etree.Element):
        if etree.QName(element).localname in PERMISSION_TAGS:
            collector.add(element.get(f"{{{ANDROID_NS}}}name"), element.sourceline)
    return collector.build()


def parse_manifest_bytes(data):
    """Binary manifests (AXML magic) go to parse_axml, anything else is treated as UTF-8 text."""
    if data[:2] == AXML_MAGIC:
        return parse_axml(data)
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise XmlSyntax(f"manifest is neither AXML nor UTF-8 text: {e}") from e
    return parse_plain_xml(text)


def parse_manifest_file(path):
    """
    Read a manifest from disk, binary or plain.

    Args:
        path (str): Path to an .axml/.xml file.

    Returns:
        ManifestInfo: The parsed manifest.

    Raises:
        IoError: If the file cannot be read.
        AxmlError, XmlSyntax: If the content cannot be parsed.
    """
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as e:
        logging.error("Error reading manifest %s: %s", path, e)
        raise IoError(f"cannot read {path}: {e}") from e
    info = parse_manifest_bytes(data)
    logging.info("Parsed %s: %d permissions", path, len(info.declared_permissions))
    return info


def short_name(permission):
    """Final dot-segment of a permission name: android.permission.SEND_SMS -> SEND_SMS."""
    return permission.rsplit(".", 1)[-1]


def to_permission_vector(info, catalog):
    """
    Project declared permissions onto the catalog order.

    Matching uses the unqualified final segment, case-sensitive.

    Args:
        info (ManifestInfo): Parsed manifest.
        catalog (PermissionCatalog): Non-empty catalog.

    Returns:
        tuple: (numpy uint8 vector of length len(catalog), count of permissions outside the catalog)
    """
    if len(catalog) == 0:
        raise EmptyInput("catalog must not be empty")
    vector = np.zeros(len(catalog), dtype=np.uint8)
    unknown = 0
    for permission in info.declared_permissions:
        position = catalog.index_of(short_name(permission))
        if position is None:
            unknown += 1
        else:
            vector[position] = 1
    return vector, unknown
