import struct
import time
import unittest
from unittest.mock import patch

import numpy as np

from src.extract.axml import ChunkType, iter_chunks, parse_axml
from src.extract.info import ManifestInfo
from src.utils.errors import AxmlError, BadStringIndex, MalformedHeader, TruncatedChunk
from tests.axml_writer import build_manifest, document, start_element, string_pool


def _truncate(data, length):
    cut = bytearray(data[:length])
    struct.pack_into("<I", cut, 4, length)
    return bytes(cut)


class TestParseAxml(unittest.TestCase):

    def test_minimal_manifest(self):
        info = parse_axml(build_manifest("com.example.app", ["android.permission.INTERNET"]))
        self.assertEqual(info.package_name, "com.example.app")
        self.assertEqual(info.declared_permissions, ("android.permission.INTERNET",))
        self.assertEqual(info.parse_warnings, ())

    def test_utf16_pool(self):
        permissions = ["android.permission.SEND_SMS", "android.permission.READ_CONTACTS"]
        info = parse_axml(build_manifest("a.b", permissions, utf8=False))
        self.assertEqual(info.declared_permissions, tuple(permissions))

    def test_no_permissions(self):
        info = parse_axml(build_manifest("a.b", []))
        self.assertEqual(info.declared_permissions, ())
        self.assertEqual(info.parse_warnings, ())

    def test_long_strings_use_two_byte_lengths(self):
        permission = "com.vendor." + "X" * 300
        for utf8 in (True, False):
            with self.subTest(utf8=utf8):
                info = parse_axml(build_manifest("a.b", [permission], utf8=utf8))
                self.assertEqual(info.declared_permissions, (permission,))

    def test_sdk23_permission_tag(self):
        info = parse_axml(build_manifest("a.b", ["android.permission.CAMERA"], tag="uses-permission-sdk-23"))
        self.assertEqual(info.declared_permissions, ("android.permission.CAMERA",))

    def test_name_recognised_by_resource_id(self):
        info = parse_axml(build_manifest("a.b", ["android.permission.INTERNET"], name_by_resource_id=True))
        self.assertEqual(info.declared_permissions, ("android.permission.INTERNET",))

    @patch("src.extract.info.logging")
    def test_duplicate_permission_kept_once_with_warning(self, mock_logging):
        info = parse_axml(build_manifest("a.b", ["android.permission.INTERNET"] * 2))
        self.assertEqual(info.declared_permissions, ("android.permission.INTERNET",))
        self.assertEqual(len(info.parse_warnings), 1)
        mock_logging.warning.assert_called_once()

    @patch("src.extract.info.logging")
    def test_unknown_chunk_skipped_with_warning(self, mock_logging):
        unknown = struct.pack("<HHI", 0x0777, 8, 16) + b"\x00" * 8
        info = parse_axml(build_manifest("a.b", ["android.permission.INTERNET"], extra_chunks=(unknown,)))
        self.assertEqual(info.declared_permissions, ("android.permission.INTERNET",))
        self.assertEqual(len(info.parse_warnings), 1)
        self.assertIn("0x0777", info.parse_warnings[0])

    def test_truncated_mid_chunk(self):
        data = build_manifest("a.b", ["android.permission.INTERNET"])
        with self.assertRaises(TruncatedChunk):
            parse_axml(_truncate(data, len(data) - 12))

    def test_declared_length_beyond_input(self):
        data = build_manifest("a.b", ["android.permission.INTERNET"])
        with self.assertRaises(MalformedHeader):
            parse_axml(data[:-12])

    def test_bad_magic(self):
        data = bytearray(build_manifest("a.b", []))
        data[0] = 0x07
        with self.assertRaises(MalformedHeader):
            parse_axml(bytes(data))

    def test_short_input(self):
        with self.assertRaises(MalformedHeader):
            parse_axml(b"\x03\x00")

    def test_string_index_outside_pool(self):
        data = document([string_pool(["manifest"]), start_element(999, [])])
        with self.assertRaises(BadStringIndex):
            parse_axml(data)

    def test_element_before_string_pool(self):
        with self.assertRaises(MalformedHeader):
            parse_axml(document([start_element(0, [])]))

    def test_misaligned_chunk(self):
        data = bytearray(document([struct.pack("<HHI", 0x0777, 8, 10) + b"\x00\x00"]))
        with self.assertRaises(MalformedHeader):
            parse_axml(bytes(data))


class TestIterChunks(unittest.TestCase):

    def test_chunk_sequence(self):
        chunks = list(iter_chunks(build_manifest("a.b", [])))
        self.assertEqual([c.kind for c in chunks], [
            ChunkType.STRING_POOL, ChunkType.RESOURCE_MAP, ChunkType.START_NAMESPACE,
            ChunkType.START_ELEMENT, ChunkType.END_ELEMENT, ChunkType.END_NAMESPACE,
        ])
        for chunk in chunks:
            self.assertGreaterEqual(chunk.total_size, chunk.header_size)
            self.assertEqual(chunk.total_size % 4, 0)
            self.assertEqual(len(chunk.payload), chunk.total_size)

    def test_offsets_are_contiguous(self):
        data = build_manifest("a.b", ["android.permission.INTERNET"])
        chunks = list(iter_chunks(data))
        self.assertEqual(chunks[0].offset, 8)
        for previous, current in zip(chunks, chunks[1:]):
            self.assertEqual(current.offset, previous.offset + previous.total_size)
        self.assertEqual(chunks[-1].offset + chunks[-1].total_size, len(data))


class TestParseAxmlFuzz(unittest.TestCase):

    @patch("src.extract.info.logging")
    def test_mutated_inputs_parse_or_raise_typed_errors(self, _mock_logging):
        rng = np.random.default_rng(20240601)
        seeds = [
            build_manifest("com.example", ["android.permission.INTERNET", "android.permission.SEND_SMS"]),
            build_manifest("com.example", ["android.permission.CAMERA"], utf8=False),
            build_manifest("x", [], name_by_resource_id=True),
        ]
        slowest = 0.0
        for trial in range(10000):
            data = bytearray(seeds[trial % len(seeds)])
            mode = trial % 3
            if mode == 0:
                for position in rng.integers(0, len(data), size=int(rng.integers(1, 8))):
                    data[position] = int(rng.integers(0, 256))
            elif mode == 1:
                length = int(rng.integers(8, len(data)))
                data = bytearray(_truncate(bytes(data), length))
            else:
                position = int(rng.integers(8, len(data)))
                struct.pack_into("<I", data, position - position % 4, int(rng.integers(0, 2 ** 32)))
            start = time.perf_counter()
            try:
                result = parse_axml(bytes(data))
                self.assertIsInstance(result, ManifestInfo)
                self.assertTrue(all(result.declared_permissions))
            except AxmlError:
                pass
            slowest = max(slowest, time.perf_counter() - start)
        self.assertLess(slowest, 0.1)


if __name__ == '__main__':
    unittest.main()
