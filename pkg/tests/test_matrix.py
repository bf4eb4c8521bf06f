import unittest

import numpy as np

from src.data.catalog import PermissionCatalog, ProtectionLevel, load_catalog
from src.data.matrix import (
    AppCategory,
    FeatureMatrix,
    align_to_catalog,
    build_matrix,
    filter_families,
    merge_matrices,
    remove_zero_impact,
    stratified_split,
    train_size,
)
from src.utils.errors import (
    BadParameter,
    ClassTooSmall,
    EmptyMatrix,
    SchemaError,
    UnknownFeature,
    WidthMismatch,
)


def small_matrix():
    return FeatureMatrix(
        ("A", "B", "C"),
        [[1, 0, 1], [0, 0, 1], [1, 0, 0], [1, 0, 1], [0, 0, 0]],
        [0, 0, 1, 1, 1],
        (None, None, "FakeInstaller", "Plankton", "Opfake"),
        ("a1", "a2", "a3", "a4", "a5"),
    )


class TestFeatureMatrix(unittest.TestCase):

    def test_rejects_non_binary_cells(self):
        with self.assertRaises(SchemaError):
            FeatureMatrix(("A",), [[2]], [0])

    def test_rejects_wrong_width(self):
        with self.assertRaises(WidthMismatch):
            FeatureMatrix(("A", "B"), [[1]], [0])

    def test_rejects_label_count(self):
        with self.assertRaises(WidthMismatch):
            FeatureMatrix(("A",), [[1], [0]], [0])

    def test_arrays_are_read_only(self):
        matrix = small_matrix()
        with self.assertRaises(ValueError):
            matrix.rows[0, 0] = 0

    def test_default_ids_and_families(self):
        matrix = FeatureMatrix(("A",), [[1], [0]], [0, 1])
        self.assertEqual(matrix.app_ids, ("app-000000", "app-000001"))
        self.assertEqual(matrix.families, (None, None))

    def test_class_counts(self):
        self.assertEqual(small_matrix().class_counts(), (2, 3))

    def test_select_columns_and_subset(self):
        matrix = small_matrix()
        projected = matrix.select_columns(["C", "A"])
        self.assertEqual(projected.feature_names, ("C", "A"))
        np.testing.assert_array_equal(projected.rows[0], [1, 1])
        rows = matrix.subset([4, 0])
        self.assertEqual(rows.app_ids, ("a5", "a1"))
        np.testing.assert_array_equal(rows.labels, [1, 0])
        with self.assertRaises(UnknownFeature):
            matrix.select_columns(["Z"])


class TestBuildMatrix(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.catalog = load_catalog()

    def test_two_vectors(self):
        vectors = [(np.zeros(94), "benign", None), (np.ones(94), AppCategory.MALWARE, "Opfake")]
        matrix = build_matrix(vectors, self.catalog)
        self.assertEqual(matrix.rows.shape, (2, 94))
        self.assertEqual(matrix.feature_names, self.catalog.names)
        self.assertEqual(matrix.families, (None, "Opfake"))

    def test_empty(self):
        matrix = build_matrix([], self.catalog)
        self.assertEqual(matrix.rows.shape, (0, 94))

    def test_wrong_width(self):
        with self.assertRaises(WidthMismatch):
            build_matrix([(np.zeros(93), "benign", None)], self.catalog)


class TestRemoveZeroImpact(unittest.TestCase):

    def test_drops_zero_column(self):
        matrix = FeatureMatrix(("X", "Y"), [[1, 0], [0, 0], [1, 0]], [0, 1, 1])
        reduced, removed = remove_zero_impact(matrix)
        self.assertEqual(reduced.rows.shape, (3, 1))
        self.assertEqual(removed, ["Y"])

    def test_no_zero_columns(self):
        matrix = FeatureMatrix(("X", "Y"), [[1, 0], [0, 1]], [0, 1])
        reduced, removed = remove_zero_impact(matrix)
        self.assertEqual(reduced, matrix)
        self.assertEqual(removed, [])

    def test_forty_five_unused_of_ninety_four(self):
        catalog = load_catalog()
        rng = np.random.default_rng(3)
        rows = np.zeros((200, 94), dtype=np.uint8)
        rows[:, :49] = rng.random((200, 49)) < 0.3
        rows[0, :49] = 1
        matrix = FeatureMatrix(catalog.names, rows, np.arange(200) % 2)
        reduced, removed = remove_zero_impact(matrix)
        self.assertEqual(reduced.n_features, 49)
        self.assertEqual(len(removed), 45)

    def test_idempotent(self):
        once, _ = remove_zero_impact(small_matrix())
        twice, removed = remove_zero_impact(once)
        self.assertEqual(once, twice)
        self.assertEqual(removed, [])

    def test_empty_matrix(self):
        with self.assertRaises(EmptyMatrix):
            remove_zero_impact(FeatureMatrix(("A",), np.zeros((0, 1)), []))


class TestFilterFamilies(unittest.TestCase):

    def test_keeps_selected_families(self):
        filtered = filter_families(small_matrix(), {"FakeInstaller", "Opfake"})
        self.assertEqual(filtered.app_ids, ("a1", "a2", "a3", "a5"))
        self.assertEqual(filtered.feature_names, ("A", "B", "C"))

    def test_empty_keep_leaves_benign(self):
        filtered = filter_families(small_matrix(), set())
        self.assertEqual(filtered.class_counts(), (2, 0))

    def test_all_families_is_identity(self):
        matrix = small_matrix()
        self.assertEqual(filter_families(matrix, {"FakeInstaller", "Plankton", "Opfake"}), matrix)


class TestMergeAndAlign(unittest.TestCase):

    def test_merge(self):
        merged = merge_matrices([small_matrix(), small_matrix()])
        self.assertEqual(merged.n_rows, 10)
        self.assertEqual(merged.class_counts(), (4, 6))

    def test_merge_rejects_different_columns(self):
        other = FeatureMatrix(("A", "B"), [[1, 0]], [0])
        with self.assertRaises(WidthMismatch):
            merge_matrices([small_matrix(), other])

    def test_merge_nothing(self):
        with self.assertRaises(EmptyMatrix):
            merge_matrices([])

    def test_align_to_catalog(self):
        catalog = PermissionCatalog((("C", ProtectionLevel.NORMAL), ("B", ProtectionLevel.NORMAL),
                                     ("A", ProtectionLevel.NORMAL), ("D", ProtectionLevel.NORMAL)))
        aligned = align_to_catalog(small_matrix(), catalog)
        self.assertEqual(aligned.feature_names, ("C", "B", "A", "D"))
        np.testing.assert_array_equal(aligned.rows[0], [1, 0, 1, 0])

    def test_align_rejects_unknown_column(self):
        catalog = PermissionCatalog((("A", ProtectionLevel.NORMAL),))
        with self.assertRaises(UnknownFeature):
            align_to_catalog(small_matrix(), catalog)


class TestStratifiedSplit(unittest.TestCase):

    def setUp(self):
        self.matrix = FeatureMatrix(("A",), np.zeros((20, 1)), [0] * 10 + [1] * 10)

    def test_seven_three_per_class(self):
        split = stratified_split(self.matrix, 0.7, seed=5)
        labels = self.matrix.labels
        self.assertEqual(int((labels[list(split.train)] == 0).sum()), 7)
        self.assertEqual(int((labels[list(split.train)] == 1).sum()), 7)
        self.assertEqual(len(split.test), 6)

    def test_partition(self):
        split = stratified_split(self.matrix, 0.7, seed=5)
        self.assertFalse(set(split.train) & set(split.test))
        self.assertEqual(sorted(split.train + split.test), list(range(20)))
        self.assertEqual(list(split.train), sorted(split.train))

    def test_deterministic(self):
        self.assertEqual(stratified_split(self.matrix, 0.7, seed=9), stratified_split(self.matrix, 0.7, seed=9))
        self.assertNotEqual(stratified_split(self.matrix, 0.7, seed=9).train,
                            stratified_split(self.matrix, 0.7, seed=10).train)

    def test_corpus_scale_train_sizes(self):
        self.assertEqual(train_size(114298, 0.7), 80009)
        self.assertEqual(train_size(5510, 0.7), 3857)

    def test_train_size_keeps_both_sides_non_empty(self):
        self.assertEqual(train_size(2, 0.99), 1)
        self.assertEqual(train_size(2, 0.01), 1)

    def test_class_too_small(self):
        matrix = FeatureMatrix(("A",), np.zeros((3, 1)), [0, 0, 1])
        with self.assertRaises(ClassTooSmall):
            stratified_split(matrix, 0.7, seed=1)

    def test_bad_fraction(self):
        with self.assertRaises(BadParameter):
            stratified_split(self.matrix, 1.0, seed=1)


if __name__ == '__main__':
    unittest.main()
