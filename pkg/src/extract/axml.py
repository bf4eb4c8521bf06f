"""
Reader for Android binary XML (AXML), the encoding AndroidManifest.xml takes
inside an APK.

Only the chunks needed to recover uses-permission names are interpreted: the
string pool, the resource map and start elements. Every other chunk is walked
over. Layout reference: frameworks/base/libs/androidfw/include/androidfw/ResourceTypes.h
"""

import logging
import struct
from dataclasses import dataclass
from enum import IntEnum

from src.extract.info import ANDROID_NS, PERMISSION_TAGS, PermissionCollector
from src.utils.errors import BadStringIndex, MalformedHeader, TruncatedChunk

AXML_MAGIC = b"\x03\x00"
RES_XML_TYPE = 0x0003
CHUNK_HEADER_SIZE = 8
STRING_POOL_HEADER_SIZE = 0x1C
NODE_HEADER_SIZE = 0x10
ATTR_EXT_SIZE = 0x14
ATTRIBUTE_SIZE = 0x14
NO_INDEX = 0xFFFFFFFF
UTF8_FLAG = 1 << 8
TYPE_STRING = 0x03
# android:name in the framework resource table
ATTR_NAME_RESOURCE_ID = 0x01010003


class ChunkType(IntEnum):
    STRING_POOL = 0x0001
    START_NAMESPACE = 0x0100
    END_NAMESPACE = 0x0101
    START_ELEMENT = 0x0102
    END_ELEMENT = 0x0103
    TEXT = 0x0104
    RESOURCE_MAP = 0x0180


KNOWN_CHUNK_TYPES = frozenset(int(t) for t in ChunkType)


@dataclass(frozen=True)
class AxmlChunk:
    """
    One typed, length-prefixed block of an AXML document.

    Attributes:
        chunk_type (int): Raw 16-bit type code.
        header_size (int): Size of the chunk header in bytes.
        total_size (int): Size of the whole chunk, header included.
        payload (bytes): The chunk's raw bytes, header included.
        offset (int): Position of the chunk in the document.
    """

    chunk_type: int
    header_size: int
    total_size: int
    payload: bytes
    offset: int = 0

    @property
    def kind(self):
        if self.chunk_type in KNOWN_CHUNK_TYPES:
            return ChunkType(self.chunk_type)
        return None


def read_file_header(data):
    """
    Validate the document header.

    Returns:
        tuple: (header_size, declared document length)

    Raises:
        MalformedHeader: On bad magic, header size or declared length.
    """
    if len(data) < CHUNK_HEADER_SIZE:
        raise MalformedHeader(f"input of {len(data)} bytes is shorter than a chunk header")
    res_type, header_size, size = struct.unpack_from("<HHI", data, 0)
    if res_type != RES_XML_TYPE:
        raise MalformedHeader(f"bad magic 0x{res_type:04x}, expected 0x{RES_XML_TYPE:04x}")
    if header_size < CHUNK_HEADER_SIZE or header_size > size:
        raise MalformedHeader(f"bad document header size {header_size}")
    if size > len(data):
        raise MalformedHeader(f"declared length {size} exceeds input length {len(data)}")
    return header_size, size


def iter_chunks(data):
    """
    Walk the top-level chunks of an AXML document.

    The walk is bounded: every chunk is at least eight bytes long, and the
    number of chunks is capped at the declared length divided by eight.

    Args:
        data (bytes): The whole document.

    Yields:
        AxmlChunk: Chunks in document order.

    Raises:
        MalformedHeader: On inconsistent chunk headers.
        TruncatedChunk: When a chunk runs past the end of the document.
    """
    header_size, end = read_file_header(data)
    offset = header_size
    budget = end // CHUNK_HEADER_SIZE
    while offset < end:
        if budget == 0:
            raise MalformedHeader("chunk count exceeds what the input length allows")
        budget -= 1
        if end - offset < CHUNK_HEADER_SIZE:
            raise TruncatedChunk(f"{end - offset} trailing bytes at offset {offset} cannot hold a chunk header")
        chunk_type, chunk_header, chunk_size = struct.unpack_from("<HHI", data, offset)
        if chunk_header < CHUNK_HEADER_SIZE or chunk_size < chunk_header:
            raise MalformedHeader(f"chunk at offset {offset} has header {chunk_header} and size {chunk_size}")
        if chunk_size % 4:
            raise MalformedHeader(f"chunk at offset {offset} is not 4-byte aligned (size {chunk_size})")
        if chunk_size > end - offset:
            raise TruncatedChunk(f"chunk at offset {offset} needs {chunk_size} bytes, {end - offset} remain")
        yield AxmlChunk(chunk_type, chunk_header, chunk_size, bytes(data[offset:offset + chunk_size]), offset)
        offset += chunk_size


class _UnreadableString(Exception):
    pass


class StringPool:
    """
    Lazily decoded string pool (UTF-8 or UTF-16).

    Strings that cannot be decoded resolve to "" and leave a warning with the
    owning collector; only out-of-range indices are errors.
    """

    def __init__(self, chunk, collector):
        data = chunk.payload
        if chunk.header_size < STRING_POOL_HEADER_SIZE:
            raise MalformedHeader(f"string pool header of {chunk.header_size} bytes")
        count, style_count, flags, strings_start, _ = struct.unpack_from("<5I", data, CHUNK_HEADER_SIZE)
        index_end = chunk.header_size + 4 * (count + style_count)
        if index_end > chunk.total_size:
            raise TruncatedChunk(f"string pool index of {count} entries overruns its chunk")
        self.data = data
        self.offsets = struct.unpack_from(f"<{count}I", data, chunk.header_size)
        self.utf8 = bool(flags & UTF8_FLAG)
        self.strings_start = strings_start
        self.collector = collector
        self._cache = {}

    def __len__(self):
        return len(self.offsets)

    def get(self, index):
        if index >= len(self.offsets):
            raise BadStringIndex(f"string index {index} outside pool of {len(self.offsets)}")
        if index not in self._cache:
            try:
                position = self.strings_start + self.offsets[index]
                self._cache[index] = self._decode_utf8(position) if self.utf8 else self._decode_utf16(position)
            except (_UnreadableString, IndexError, struct.error):
                self.collector.warn(f"string {index} in pool is unreadable, using empty string")
                self._cache[index] = ""
        return self._cache[index]

    def _utf8_length(self, position):
        first = self.data[position]
        if first & 0x80:
            return ((first & 0x7F) << 8) | self.data[position + 1], position + 2
        return first, position + 1

    def _decode_utf8(self, position):
        # UTF-16 length first, then the UTF-8 byte length
        _, position = self._utf8_length(position)
        size, position = self._utf8_length(position)
        if position + size > len(self.data):
            raise _UnreadableString()
        return self.data[position:position + size].decode("utf-8", errors="replace")

    def _decode_utf16(self, position):
        (size,) = struct.unpack_from("<H", self.data, position)
        position += 2
        if size & 0x8000:
            (low,) = struct.unpack_from("<H", self.data, position)
            size = ((size & 0x7FFF) << 16) | low
            position += 2
        end = position + 2 * size
        if end > len(self.data):
            raise _UnreadableString()
        return self.data[position:end].decode("utf-16-le", errors="replace")


def _resource_ids(chunk):
    count = (chunk.total_size - chunk.header_size) // 4
    return struct.unpack_from(f"<{count}I", chunk.payload, chunk.header_size)


def _read_attributes(chunk):
    data = chunk.payload
    if chunk.header_size < NODE_HEADER_SIZE or chunk.total_size < chunk.header_size + ATTR_EXT_SIZE:
        raise MalformedHeader(f"start element at offset {chunk.offset} is too short")
    line = struct.unpack_from("<I", data, CHUNK_HEADER_SIZE)[0]
    ext = chunk.header_size
    _, name, attr_start, attr_size, attr_count = struct.unpack_from("<IIHHH", data, ext)
    if attr_count and attr_size < ATTRIBUTE_SIZE:
        raise MalformedHeader(f"attribute size {attr_size} at offset {chunk.offset}")
    first = ext + attr_start
    if first + attr_count * attr_size > chunk.total_size:
        raise TruncatedChunk(f"{attr_count} attributes overrun the element at offset {chunk.offset}")
    attributes = [
        struct.unpack_from("<IIIHBBI", data, first + i * attr_size)
        for i in range(attr_count)
    ]
    return line, name, attributes


class _ManifestReader:

    def __init__(self):
        self.collector = PermissionCollector()
        self.pool = None
        self.resource_ids = ()

    def string(self, index):
        if index == NO_INDEX:
            raise BadStringIndex("missing string reference")
        return self.pool.get(index)

    def is_android_name(self, ns, name):
        if name < len(self.resource_ids) and self.resource_ids[name] == ATTR_NAME_RESOURCE_ID:
            return True
        return ns != NO_INDEX and self.string(name) == "name" and self.string(ns) == ANDROID_NS

    def attribute_value(self, raw_value, value_type, value_data):
        if raw_value != NO_INDEX:
            return self.string(raw_value)
        if value_type == TYPE_STRING:
            return self.string(value_data)
        return None

    def start_element(self, chunk):
        if self.pool is None:
            raise MalformedHeader(f"element at offset {chunk.offset} precedes the string pool")
        line, name, attributes = _read_attributes(chunk)
        tag = self.string(name)
        if tag == "manifest":
            for ns, attr_name, raw_value, _, _, value_type, value_data in attributes:
                if ns == NO_INDEX and self.string(attr_name) == "package":
                    self.collector.package_name = self.attribute_value(raw_value, value_type, value_data) or ""
        elif tag in PERMISSION_TAGS:
            permission = None
            for ns, attr_name, raw_value, _, _, value_type, value_data in attributes:
                if self.is_android_name(ns, attr_name):
                    permission = self.attribute_value(raw_value, value_type, value_data)
                    if permission is None:
                        self.collector.warn(f"non-string android:name on line {line}")
            self.collector.add(permission, line)

    def feed(self, chunk):
        kind = chunk.kind
        if kind is ChunkType.STRING_POOL:
            if self.pool is None:
                self.pool = StringPool(chunk, self.collector)
            else:
                self.collector.warn(f"extra string pool at offset {chunk.offset} ignored")
        elif kind is ChunkType.RESOURCE_MAP:
            self.resource_ids = _resource_ids(chunk)
        elif kind is ChunkType.START_ELEMENT:
            self.start_element(chunk)
        elif kind is None:
            self.collector.warn(f"unknown chunk type 0x{chunk.chunk_type:04x} at offset {chunk.offset} skipped")


def parse_axml(data):
    """
    Extract declared permissions from a binary manifest.

    Args:
        data (bytes): AXML document.

    Returns:
        ManifestInfo: Package name, uses-permission names and parse warnings.

    Raises:
        MalformedHeader: Bad magic, lengths or chunk headers.
        TruncatedChunk: A chunk overruns the input.
        BadStringIndex: An element or attribute references a string outside the pool.
    """
    reader = _ManifestReader()
    for chunk in iter_chunks(data):
        reader.feed(chunk)
    info = reader.collector.build()
    logging.debug("AXML manifest %s declares %d permissions", info.package_name, len(info.declared_permissions))
    return info
