import io
import math
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
from scipy.special import erfc

from src.data.catalog import load_catalog
from src.data.csv_io import read_csv
from src.data.matrix import FeatureMatrix, remove_zero_impact
from src.data.synth import planted_signal_spec, synth_generate
from src.ranking.selection import RankingMethod, apply_filter, rank_features, write_ranking_csv
from src.ranking.statistics import (
    ContingencyTable2x2,
    chi_square_survival,
    chi_square_test,
    contingency,
    contingency_tables,
    fisher_exact_test,
)
from src.utils.errors import BadColumn, EmptyMatrix, InvalidTable, SingleClass, UnknownFeature

FIXTURES = Path(__file__).with_name("fixtures")


def hypergeometric_masses(n, row1, col1):
    low, high = max(0, row1 + col1 - n), min(row1, col1)
    return {k: math.comb(row1, k) * math.comb(n - row1, col1 - k) for k in range(low, high + 1)}


def exact_fisher(a, b, c, d, masses=None):
    """Two-sided p by enumerating integer hypergeometric masses."""
    if masses is None:
        masses = hypergeometric_masses(a + b + c + d, a + b, a + c)
    observed = masses[a]
    selected = sum(m for m in masses.values() if m * 10 ** 7 <= observed * (10 ** 7 + 1))
    return selected / sum(masses.values())


class TestContingencyTable(unittest.TestCase):

    def test_rejects_negative_cells(self):
        with self.assertRaises(InvalidTable):
            ContingencyTable2x2(-1, 2, 3, 4)

    def test_rejects_empty_table(self):
        with self.assertRaises(InvalidTable):
            ContingencyTable2x2(0, 0, 0, 0)

    def test_perfect_feature(self):
        matrix = FeatureMatrix(("A",), [[1], [1], [0], [0], [0]], [1, 1, 0, 0, 0])
        self.assertEqual(tuple(contingency(matrix, 0)), (2, 0, 0, 3))

    def test_all_zero_column(self):
        matrix = FeatureMatrix(("A",), np.zeros((10, 1)), [1] * 5 + [0] * 5)
        self.assertEqual(tuple(contingency(matrix, 0)), (0, 5, 0, 5))

    def test_mixed_rows_match_manual_tally(self):
        matrix = FeatureMatrix(("A", "B"), [[1, 0], [0, 1], [1, 1], [0, 0]], [1, 1, 0, 0])
        self.assertEqual(tuple(contingency(matrix, 0)), (1, 1, 1, 1))
        self.assertEqual(tuple(contingency(matrix, 1)), (1, 1, 1, 1))
        self.assertEqual([tuple(t) for t in contingency_tables(matrix)], [(1, 1, 1, 1), (1, 1, 1, 1)])

    def test_bad_column(self):
        matrix = FeatureMatrix(("A",), [[1]], [1])
        with self.assertRaises(BadColumn):
            contingency(matrix, 1)

    def test_empty_matrix(self):
        with self.assertRaises(EmptyMatrix):
            contingency(FeatureMatrix(("A",), np.zeros((0, 1)), []), 0)

    def test_vectorised_tables_agree(self):
        matrix = read_csv(FIXTURES / "synthetic_matrix.csv")
        self.assertEqual(contingency_tables(matrix), [contingency(matrix, i) for i in range(matrix.n_features)])


class TestChiSquare(unittest.TestCase):

    def test_proportional_rows(self):
        result = chi_square_test(ContingencyTable2x2(10, 10, 20, 20))
        self.assertEqual(result.statistic, 0.0)
        self.assertEqual(result.p_value, 1.0)
        self.assertFalse(result.degenerate)

    def test_known_value(self):
        result = chi_square_test(ContingencyTable2x2(10, 20, 20, 10))
        self.assertAlmostEqual(result.statistic, 20 / 3, places=12)
        self.assertAlmostEqual(result.p_value, 0.009823, places=6)
        self.assertAlmostEqual(result.p_value, erfc(math.sqrt(10 / 3)), delta=1e-15)

    def test_degenerate_margin(self):
        result = chi_square_test(ContingencyTable2x2(0, 5, 0, 5))
        self.assertEqual((result.statistic, result.p_value, result.degenerate), (0.0, 1.0, True))

    def test_yates_correction_shrinks_statistic(self):
        table = ContingencyTable2x2(10, 20, 20, 10)
        corrected = chi_square_test(table, yates=True)
        self.assertAlmostEqual(corrected.statistic, 60 * (300 - 30) ** 2 / 30 ** 4, places=12)
        self.assertGreater(corrected.p_value, chi_square_test(table).p_value)

    def test_yates_never_negative(self):
        self.assertEqual(chi_square_test(ContingencyTable2x2(5, 5, 5, 6), yates=True).statistic, 0.0)

    def test_zero_statistic_iff_cross_products_equal(self):
        for a, b, c, d in [(1, 2, 3, 6), (4, 4, 4, 4), (2, 3, 4, 5), (7, 1, 1, 7)]:
            statistic = chi_square_test(ContingencyTable2x2(a, b, c, d)).statistic
            self.assertEqual(statistic == 0.0, a * d == b * c)

    def test_survival_is_decreasing(self):
        values = [chi_square_survival(x) for x in np.linspace(0, 50, 200)]
        self.assertTrue(all(later < earlier for earlier, later in zip(values, values[1:])))

    def test_corpus_scale_tables_match_erfc(self):
        tables = [(300, 5210, 6000, 108298), (500, 5010, 6000, 108298), (2000, 3510, 30000, 84298)]
        for cells in tables:
            with self.subTest(cells=cells):
                table = ContingencyTable2x2(*cells)
                self.assertEqual(table.n, 119808)
                result = chi_square_test(table)
                self.assertTrue(0.0 <= result.p_value <= 1.0)
                self.assertTrue(math.isfinite(result.statistic))
                oracle = erfc(math.sqrt(result.statistic / 2))
                if oracle > 0:
                    self.assertLessEqual(abs(result.p_value - oracle) / oracle, 1e-10)
                fisher = fisher_exact_test(table)
                self.assertTrue(math.isfinite(fisher) and 0.0 <= fisher <= 1.0)

    def test_scaling_preserves_order(self):
        tables = [(30, 70, 100, 800), (40, 60, 100, 800), (20, 80, 90, 810), (35, 65, 120, 780)]
        order = np.argsort([chi_square_test(ContingencyTable2x2(*t)).p_value for t in tables], kind="stable")
        scaled = np.argsort([chi_square_test(ContingencyTable2x2(*(3 * v for v in t))).p_value for t in tables],
                            kind="stable")
        np.testing.assert_array_equal(order, scaled)


class TestFisherExact(unittest.TestCase):

    def test_known_values(self):
        self.assertAlmostEqual(fisher_exact_test(ContingencyTable2x2(3, 1, 1, 3)), 34 / 70, places=12)
        self.assertAlmostEqual(fisher_exact_test(ContingencyTable2x2(5, 0, 0, 5)), 2 / 252, places=12)
        self.assertEqual(fisher_exact_test(ContingencyTable2x2(0, 0, 5, 5)), 1.0)

    def test_matches_enumeration_for_small_tables(self):
        worst = 0.0
        for n in range(1, 41):
            for row1 in range(n + 1):
                for col1 in range(n + 1):
                    masses = hypergeometric_masses(n, row1, col1)
                    for a in masses:
                        b, c = row1 - a, col1 - a
                        d = n - a - b - c
                        p = fisher_exact_test(ContingencyTable2x2(a, b, c, d))
                        worst = max(worst, abs(p - exact_fisher(a, b, c, d, masses)))
        self.assertLessEqual(worst, 1e-9)

    def test_moderate_n_relative_accuracy(self):
        for cells in [(30, 70, 200, 1700), (12, 988, 40, 960), (1, 99, 0, 1900)]:
            with self.subTest(cells=cells):
                exact = exact_fisher(*cells)
                self.assertLessEqual(abs(fisher_exact_test(ContingencyTable2x2(*cells)) - exact) / exact, 1e-9)

    def test_swap_invariance(self):
        for cells in [(3, 1, 1, 3), (7, 2, 4, 11), (0, 6, 3, 2), (12, 30, 1, 9)]:
            table = ContingencyTable2x2(*cells)
            with self.subTest(cells=cells):
                for swapped in (table.swap_rows(), table.swap_columns()):
                    self.assertAlmostEqual(fisher_exact_test(swapped), fisher_exact_test(table), delta=1e-12)
                    self.assertAlmostEqual(chi_square_test(swapped).p_value, chi_square_test(table).p_value,
                                           delta=1e-12)


class TestRankFeatures(unittest.TestCase):

    def setUp(self):
        self.matrix = read_csv(FIXTURES / "synthetic_matrix.csv")

    def test_chi_square_ranking(self):
        ranked = rank_features(self.matrix, "chi2")
        self.assertEqual([f.name for f in ranked], ["SEND_SMS", "READ_SMS", "CAMERA", "INTERNET", "VIBRATE"])
        self.assertEqual([f.kept for f in ranked], [True, True, False, False, False])
        self.assertAlmostEqual(ranked[0].statistic, 16.0, places=12)
        self.assertTrue(ranked[3].degenerate)

    def test_fisher_ranking(self):
        ranked = rank_features(self.matrix, RankingMethod.FISHER_EXACT)
        self.assertEqual([f.name for f in ranked[:2]], ["SEND_SMS", "READ_SMS"])
        self.assertAlmostEqual(ranked[0].p_value, 2 / 12870, places=12)
        self.assertAlmostEqual(ranked[1].p_value, 464 / 11440, places=12)
        self.assertTrue(all(f.statistic is None for f in ranked))
        self.assertEqual(sum(f.kept for f in ranked), 2)

    def test_threshold_is_inclusive(self):
        p_value = rank_features(self.matrix, "fisher")[1].p_value
        ranked = rank_features(self.matrix, "fisher", threshold=p_value)
        self.assertTrue(ranked[1].kept)

    def test_threads_give_identical_results(self):
        self.assertEqual(rank_features(self.matrix, "chi2", n_jobs=1), rank_features(self.matrix, "chi2", n_jobs=3))

    def test_single_class(self):
        with self.assertRaises(SingleClass):
            rank_features(self.matrix.subset(range(8)), "chi2")

    def test_perfect_predictor_ranked_first(self):
        labels = np.array([0] * 100 + [1] * 100)
        rows = np.column_stack([np.tile([0, 1], 100), labels])
        ranked = rank_features(FeatureMatrix(("NOISE", "PERFECT"), rows, labels), "fisher")
        self.assertEqual(ranked[0].name, "PERFECT")
        self.assertTrue(ranked[0].kept)
        self.assertFalse(ranked[1].kept)
        self.assertEqual(ranked[1].p_value, 1.0)

    def test_type_one_error_band(self):
        spec = planted_signal_spec(n_signal=0, n_noise=200)
        matrix = synth_generate(spec, (9540, 460), seed=17)
        for method in ("chi2", "fisher"):
            with self.subTest(method=method):
                kept = sum(f.kept for f in rank_features(matrix, method))
                self.assertLessEqual(kept / 200, 0.10)

    def test_pipeline_shape(self):
        catalog = load_catalog()
        spec = planted_signal_spec(n_signal=5, n_noise=44, n_zero=45, names=catalog.names)
        matrix = synth_generate(spec, (500, 100), seed=23)
        relevant, _ = remove_zero_impact(matrix)
        self.assertEqual(relevant.n_features, 49)
        for method in ("chi2", "fisher"):
            filtered = apply_filter(relevant, rank_features(relevant, method))
            self.assertLessEqual(filtered.n_features, relevant.n_features)
            self.assertEqual(filtered.n_rows, relevant.n_rows)


class TestApplyFilter(unittest.TestCase):

    def setUp(self):
        self.matrix = read_csv(FIXTURES / "synthetic_matrix.csv")
        self.ranked = rank_features(self.matrix, "chi2")

    def test_keeps_column_order(self):
        self.assertEqual(apply_filter(self.matrix, self.ranked).feature_names, ("SEND_SMS", "READ_SMS"))

    def test_all_kept_is_identity(self):
        ranked = rank_features(self.matrix, "chi2", threshold=1.0)
        self.assertEqual(apply_filter(self.matrix, ranked), self.matrix)

    def test_none_kept(self):
        ranked = rank_features(self.matrix, "chi2", threshold=1e-12)
        self.assertEqual(apply_filter(self.matrix, ranked).rows.shape, (16, 0))

    def test_unknown_feature(self):
        with self.assertRaises(UnknownFeature):
            apply_filter(self.matrix.select_columns(["SEND_SMS"]), self.ranked)


class TestRankingReport(unittest.TestCase):

    def test_csv_layout(self):
        ranked = rank_features(read_csv(FIXTURES / "synthetic_matrix.csv"), "chi2")
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            write_ranking_csv(ranked, "-")
        lines = stdout.getvalue().splitlines()
        self.assertEqual(lines[0], "permission,statistic,p_value,kept")
        self.assertEqual(lines[1], "SEND_SMS,16.0000,6.33E-05,true")
        self.assertEqual(lines[4], "INTERNET,0.0000,1.00E+00,false")

    def test_fisher_statistic_blank(self):
        ranked = rank_features(read_csv(FIXTURES / "synthetic_matrix.csv"), "fisher")
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            write_ranking_csv(ranked, "-")
        self.assertTrue(stdout.getvalue().splitlines()[1].startswith("SEND_SMS,,1.55E-04,"))


if __name__ == '__main__':
    unittest.main()
