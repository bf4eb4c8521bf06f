import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from src.models.svm import KernelType
from src.utils.config import RunConfig, convert, load_config, read_config_file
from src.utils.errors import ConfigError

FIXTURES = Path(__file__).with_name("fixtures")


def environment(**values):
    """side_effect for get_env_variable backed by a dict."""
    return lambda key, required=True: values.get(key)


@patch("src.utils.config.get_env_variable", side_effect=environment())
class TestLoadConfig(unittest.TestCase):

    def _write(self, text):
        handle = tempfile.NamedTemporaryFile("w", suffix=".conf", delete=False, encoding="utf-8")
        handle.write(text)
        handle.close()
        self.addCleanup(os.unlink, handle.name)
        return handle.name

    def test_defaults(self, _):
        config = load_config(overrides={"seed": 3})
        self.assertEqual(config, RunConfig(seed=3))
        self.assertEqual(config.tree_params().min_leaf, 7)
        self.assertEqual(config.forest_params().n_trees, 500)
        self.assertIs(config.svm_params().kernel, KernelType.RBF)
        self.assertEqual(config.tune_grid().costs, (0.1, 1.0, 10.0, 100.0))

    def test_fixture_file(self, _):
        config = load_config(str(FIXTURES / "run.conf"))
        self.assertEqual(config.seed, 11)
        self.assertEqual(config.alpha_threshold, 0.01)
        self.assertEqual(config.train_fraction, 0.75)
        self.assertEqual(config.rf_n_trees, 25)
        self.assertIsNone(config.rf_mtry)
        self.assertIs(config.svm_kernel, KernelType.LINEAR)
        self.assertEqual(config.tune_costs, (0.5, 5.0))

    def test_environment_overrides_file(self, mock_env):
        mock_env.side_effect = environment(PERMRANK_SEED="99", PERMRANK_THREADS="4")
        config = load_config(str(FIXTURES / "run.conf"))
        self.assertEqual((config.seed, config.threads), (99, 4))

    def test_flags_override_environment(self, mock_env):
        mock_env.side_effect = environment(PERMRANK_SEED="99")
        config = load_config(str(FIXTURES / "run.conf"), overrides={"seed": 5, "threads": None})
        self.assertEqual((config.seed, config.threads), (5, 1))

    def test_config_path_from_environment(self, mock_env):
        mock_env.side_effect = environment(PERMRANK_CONFIG=str(FIXTURES / "run.conf"))
        self.assertEqual(load_config().rf_n_trees, 25)

    def test_settings_carry_through(self, _):
        settings = load_config(self._write("seed = 8\nthreads = 2\nrf.n_trees = 7\ntune.folds = 3\n")
                               ).experiment_settings()
        self.assertEqual((settings.forest.n_trees, settings.forest.seed), (7, 8))
        self.assertEqual((settings.n_jobs, settings.folds), (2, 3))

    @patch("src.utils.config.logging")
    def test_missing_seed_is_drawn_and_logged(self, mock_logging, _):
        config = load_config()
        self.assertTrue(0 <= config.seed < 2 ** 32)
        mock_logging.info.assert_called_with("No seed given; using recorded seed %d", config.seed)

    def test_unknown_key(self, _):
        with self.assertRaises(ConfigError):
            load_config(self._write("seed = 1\nsvm.degree = 3\n"))

    def test_value_out_of_range(self, _):
        with self.assertRaises(ConfigError):
            load_config(self._write("alpha_threshold = 1.5\n"))

    def test_bad_environment_value(self, mock_env):
        mock_env.side_effect = environment(PERMRANK_THREADS="many")
        with self.assertRaises(ConfigError):
            load_config(overrides={"seed": 1})

    def test_missing_file(self, _):
        with self.assertRaises(ConfigError):
            load_config("/nonexistent/run.conf")


class TestConfigParsing(unittest.TestCase):

    def test_comments_and_blank_lines(self):
        self.assertEqual(read_config_file(FIXTURES / "run.conf")["tune.costs"], "0.5, 5")

    def test_line_without_separator(self):
        handle = tempfile.NamedTemporaryFile("w", suffix=".conf", delete=False, encoding="utf-8")
        handle.write("seed 4\n")
        handle.close()
        self.addCleanup(os.unlink, handle.name)
        with self.assertRaises(ConfigError):
            read_config_file(handle.name)

    def test_convert(self):
        self.assertEqual(convert("yates", "on"), ("yates", True))
        self.assertEqual(convert("svm.gamma", "auto"), ("svm_gamma", None))
        self.assertEqual(convert("tune.gamma_multipliers", [1, 2]), ("tune_gamma_multipliers", (1.0, 2.0)))
        with self.assertRaises(ConfigError):
            convert("yates", "maybe")
        with self.assertRaises(ConfigError):
            convert("svm.kernel", "poly")
        with self.assertRaises(ConfigError):
            convert("dt.min_split", "1")


if __name__ == '__main__':
    unittest.main()
