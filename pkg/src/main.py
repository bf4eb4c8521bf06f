"""
Command line entry point: extract permissions from manifests, build and
shape feature matrices, rank permissions, train and evaluate classifiers and
run the full experiment matrix.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

import argparse
import logging
import sys
from dataclasses import replace

from src.data.catalog import load_catalog
from src.data.csv_io import read_csv, write_csv
from src.data.matrix import (
    AppCategory,
    align_to_catalog,
    build_matrix,
    filter_families,
    merge_matrices,
    remove_zero_impact,
    stratified_split,
)
from src.data.synth import planted_signal_spec, synth_generate
from src.evaluation.experiment import (
    ClassifierSpec,
    FeatureSetKind,
    METRIC_COLUMNS,
    run_experiment_matrix,
    write_report_csv,
    write_report_json,
)
from src.evaluation.metrics import confusion, metrics
from src.extract.manifest import parse_manifest_file, to_permission_vector
from src.models.forest import ForestModel, rf_predict_matrix, rf_train
from src.models.serialization import load_model, save_model
from src.models.svm import SvmModel, svm_predict_matrix, svm_train, svm_tune
from src.models.tree import dt_predict_matrix, dt_train
from src.ranking.selection import apply_filter, rank_features, write_ranking_csv
from src.utils.config import load_config
from src.utils.errors import ConfigError, PermRankError
from src.utils.helpers import format_fixed, open_output, substream_int

# Configure logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

SYNTH_FAMILIES = ("FakeInstaller", "DroidKungFu", "Plankton", "Opfake", "GinMaster")
CLASSIFIER_CHOICES = {"dt": ClassifierSpec("dt"), "rf": ClassifierSpec("rf"), "svm": ClassifierSpec("svm"),
                      "svm-tuned": ClassifierSpec("svm", tuned=True)}
CLI_SPLIT_KEY = ("split", "cli")

# flag dest -> config key
FLAG_CONFIG_KEYS = {
    "seed": "seed",
    "threads": "threads",
    "catalog": "catalog",
    "threshold": "alpha_threshold",
    "train_fraction": "train_fraction",
    "yates": "yates",
    "alpha": "f_alpha",
    "n_trees": "rf.n_trees",
    "mtry": "rf.mtry",
    "kernel": "svm.kernel",
    "cost": "svm.cost",
    "gamma": "svm.gamma",
    "folds": "tune.folds",
}


class CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_output(parser, what):
    parser.add_argument("-o", "--output", default="-", help=f"Where to write the {what}; '-' is standard output.")


def _add_run_options(parser, default=None):
    parser.add_argument("--config", default=default, help="Key = value config file (default: $PERMRANK_CONFIG).")
    parser.add_argument("--seed", type=int, default=default,
                        help="Seed for every stochastic stage; a recorded random seed when omitted.")
    parser.add_argument("--threads", type=int, default=default, help="Worker threads; results do not depend on it.")


def build_parser():
    """
    Build the argument parser with every subcommand.

    --config, --seed and --threads are accepted before or after the
    subcommand; a value given after it wins.
    """
    # SUPPRESS keeps an absent subcommand option from clearing the global one
    run_options = argparse.ArgumentParser(add_help=False)
    _add_run_options(run_options, default=argparse.SUPPRESS)

    parser = CliParser(prog="permrank", description="Android permission ranking and malware classification.")
    _add_run_options(parser)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log debug detail.")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Log warnings and errors only.")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    extract = commands.add_parser("extract", parents=[run_options], help="Extract permission vectors from manifests.",
                                  description="Extract permission vectors from binary or plain "
                                              "AndroidManifest.xml files.")
    extract.add_argument("manifests", nargs="+", metavar="MANIFEST", help="Manifest files.")
    extract.add_argument("--catalog", help="Permission catalog CSV (default: bundled 94-permission catalog).")
    extract.add_argument("--label", choices=[c.label for c in AppCategory], default="benign",
                         help="Class label given to every extracted app (default: benign).")
    extract.add_argument("--family", help="Malware family recorded for every extracted app.")
    _add_output(extract, "matrix CSV")
    extract.set_defaults(handler=run_extract)

    matrix = commands.add_parser("matrix", parents=[run_options], help="Build and reshape feature matrices.",
                                 description="Build and reshape feature-matrix CSV files.")
    actions = matrix.add_subparsers(dest="action", metavar="ACTION", required=True)
    build = actions.add_parser("build", parents=[run_options], help="Align matrices to the catalog and stack them.",
                               description="Align matrices to the catalog column order and stack them.")
    build.add_argument("inputs", nargs="+", metavar="CSV", help="Matrix CSV files.")
    build.add_argument("--catalog", help="Permission catalog CSV (default: bundled catalog).")
    _add_output(build, "matrix CSV")
    build.set_defaults(handler=run_matrix_build)
    merge = actions.add_parser("merge", parents=[run_options], help="Stack matrices with identical columns.",
                               description="Stack matrices that have identical columns.")
    merge.add_argument("inputs", nargs="+", metavar="CSV", help="Matrix CSV files.")
    _add_output(merge, "matrix CSV")
    merge.set_defaults(handler=run_matrix_merge)
    families = actions.add_parser("filter-families", parents=[run_options],
                                  help="Keep benign rows and the listed malware families.",
                                  description="Keep every benign row and the malware rows of the listed families.")
    families.add_argument("input", metavar="CSV", help="Matrix CSV file.")
    families.add_argument("--keep", nargs="+", required=True, metavar="FAMILY", help="Malware families to keep.")
    _add_output(families, "matrix CSV")
    families.set_defaults(handler=run_matrix_filter_families)
    zero = actions.add_parser("remove-zero-impact", parents=[run_options], help="Drop permissions no app requests.",
                              description="Drop the permissions that no app in the matrix requests.")
    zero.add_argument("input", metavar="CSV", help="Matrix CSV file.")
    _add_output(zero, "matrix CSV")
    zero.set_defaults(handler=run_matrix_remove_zero_impact)

    rank = commands.add_parser("rank", parents=[run_options], help="Rank permissions by p-value.",
                               description="Rank permissions by a test of independence from the label.")
    rank.add_argument("input", metavar="CSV", help="Matrix CSV file.")
    rank.add_argument("--method", choices=["chi2", "fisher"], default="chi2", help="Test to rank with (default: chi2).")
    rank.add_argument("--threshold", type=float, help="Keep permissions with p at or below this value (default: 0.05).")
    rank.add_argument("--yates", action="store_true", default=None, help="Apply the continuity correction to chi2.")
    rank.add_argument("--filtered", metavar="CSV", help="Also write the matrix restricted to kept permissions.")
    _add_output(rank, "ranking CSV")
    rank.set_defaults(handler=run_rank)

    train = commands.add_parser("train", parents=[run_options], help="Train a classifier.",
                                description="Train a decision tree, random forest or SVM and save it as JSON.")
    train.add_argument("input", metavar="CSV", help="Training matrix CSV file.")
    train.add_argument("--algo", choices=["dt", "rf", "svm"], required=True, help="Classifier to train.")
    train.add_argument("--tune", action="store_true", help="Pick SVM cost and gamma by cross-validation.")
    train.add_argument("--train-split", action="store_true", help="Train on the seeded training share only.")
    train.add_argument("--train-fraction", type=float, help="Training share of each class (default: 0.7).")
    train.add_argument("--n-trees", type=int, help="Random forest size (default: 500).")
    train.add_argument("--mtry", type=int, help="Random forest candidate features per node (default: floor(sqrt(p))).")
    train.add_argument("--kernel", choices=["linear", "rbf"], help="SVM kernel (default: rbf).")
    train.add_argument("--cost", type=float, help="SVM cost (default: 1).")
    train.add_argument("--gamma", type=float, help="SVM RBF gamma (default: 1 / feature count).")
    train.add_argument("--folds", type=int, help="Cross-validation folds for --tune (default: 5).")
    _add_output(train, "model JSON")
    train.set_defaults(handler=run_train)

    evaluate = commands.add_parser("eval", parents=[run_options], help="Score a saved model.",
                                   description="Score a saved model on a matrix and write its metrics.")
    evaluate.add_argument("model", metavar="MODEL", help="Model JSON file.")
    evaluate.add_argument("input", metavar="CSV", help="Matrix CSV file.")
    evaluate.add_argument("--test-split", action="store_true", help="Score on the seeded test share only.")
    evaluate.add_argument("--train-fraction", type=float, help="Training share of each class (default: 0.7).")
    evaluate.add_argument("--alpha", type=float, help="F-score recall weight (default: 1).")
    _add_output(evaluate, "metrics CSV")
    evaluate.set_defaults(handler=run_eval)

    bench = commands.add_parser("bench", parents=[run_options], help="Run the experiment matrix.",
                                description="Run every dataset x feature set x classifier combination and report.")
    bench.add_argument("input", nargs="?", metavar="CSV",
                       help="Dataset matrix CSV; a seeded planted-signal corpus when omitted.")
    bench.add_argument("--families", nargs="+", metavar="FAMILY",
                       help="Derive a second dataset keeping only these malware families.")
    bench.add_argument("--feature-sets", nargs="+", choices=[k.value for k in FeatureSetKind],
                       default=[k.value for k in FeatureSetKind], help="Feature sets to run (default: all).")
    bench.add_argument("--classifiers", nargs="+", choices=list(CLASSIFIER_CHOICES),
                       default=list(CLASSIFIER_CHOICES), help="Classifiers to run (default: all).")
    bench.add_argument("--benign", type=int, default=1600, help="Synthetic benign rows (default: 1600).")
    bench.add_argument("--malware", type=int, default=400, help="Synthetic malware rows (default: 400).")
    bench.add_argument("--threshold", type=float, help="Ranking p-value threshold (default: 0.05).")
    bench.add_argument("--train-fraction", type=float, help="Training share of each class (default: 0.7).")
    bench.add_argument("--n-trees", type=int, help="Random forest size (default: 500).")
    bench.add_argument("--json", metavar="PATH", help="Also write the report as JSON.")
    bench.add_argument("--no-timing", action="store_true", help="Leave timing cells empty.")
    _add_output(bench, "report CSV")
    bench.set_defaults(handler=run_bench)

    synth = commands.add_parser("synth", parents=[run_options], help="Generate a synthetic matrix.",
                                description="Generate a planted-signal synthetic matrix.")
    synth.add_argument("--benign", type=int, default=1600, help="Benign rows (default: 1600).")
    synth.add_argument("--malware", type=int, default=400, help="Malware rows (default: 400).")
    synth.add_argument("--signal", type=int, default=5, help="Informative columns (default: 5).")
    synth.add_argument("--noise", type=int, default=45, help="Class-independent columns (default: 45).")
    synth.add_argument("--zero", type=int, default=0, help="All-zero columns (default: 0).")
    synth.add_argument("--families", nargs="+", metavar="FAMILY", default=list(SYNTH_FAMILIES),
                       help="Malware families to draw from.")
    _add_output(synth, "matrix CSV")
    synth.set_defaults(handler=run_synth)
    return parser


def run_extract(args, config):
    catalog = load_catalog(config.catalog)
    vectors, unknown = [], 0
    for path in args.manifests:
        vector, outside = to_permission_vector(parse_manifest_file(path), catalog)
        unknown += outside
        vectors.append((vector, args.label, args.family))
    if unknown:
        logging.info("%d declared permissions are not in the catalog", unknown)
    write_csv(build_matrix(vectors, catalog, app_ids=args.manifests), args.output)


def run_matrix_build(args, config):
    catalog = load_catalog(config.catalog)
    write_csv(merge_matrices([align_to_catalog(read_csv(path), catalog) for path in args.inputs]), args.output)


def run_matrix_merge(args, config):
    write_csv(merge_matrices([read_csv(path) for path in args.inputs]), args.output)


def run_matrix_filter_families(args, config):
    write_csv(filter_families(read_csv(args.input), args.keep), args.output)


def run_matrix_remove_zero_impact(args, config):
    matrix, removed = remove_zero_impact(read_csv(args.input))
    logging.debug("Removed: %s", ", ".join(removed))
    write_csv(matrix, args.output)


def run_rank(args, config):
    matrix = read_csv(args.input)
    ranked = rank_features(matrix, args.method, config.alpha_threshold, config.yates, config.threads)
    write_ranking_csv(ranked, args.output)
    if args.filtered:
        write_csv(apply_filter(matrix, ranked), args.filtered)


def _cli_split(matrix, config):
    return stratified_split(matrix, config.train_fraction, substream_int(config.seed, *CLI_SPLIT_KEY))


def run_train(args, config):
    matrix = read_csv(args.input)
    if args.train_split:
        matrix = matrix.subset(_cli_split(matrix, config).train)
    if args.algo == "dt":
        model = dt_train(matrix, config.tree_params())
    elif args.algo == "rf":
        model = rf_train(matrix, replace(config.forest_params(), seed=substream_int(config.seed, "train", "rf")))
    else:
        params = config.svm_params()
        if args.tune:
            params = svm_tune(matrix, config.tune_grid(), config.tune_folds,
                              substream_int(config.seed, "train", "tune"), params, config.threads)
        model = svm_train(matrix, params)
    save_model(model, matrix.feature_names, args.output)


def predict_matrix(model, matrix):
    """Dispatch batch prediction on the model kind."""
    if isinstance(model, ForestModel):
        return rf_predict_matrix(model, matrix)
    if isinstance(model, SvmModel):
        return svm_predict_matrix(model, matrix)
    return dt_predict_matrix(model, matrix)


def run_eval(args, config):
    model, names = load_model(args.model)
    matrix = read_csv(args.input)
    if args.test_split:
        matrix = matrix.subset(_cli_split(matrix, config).test)
    matrix = matrix.select_columns(names)
    counts = confusion(predict_matrix(model, matrix), matrix.labels)
    report = metrics(counts, config.f_alpha)
    header = ["tp", "tn", "fp", "fn"] + METRIC_COLUMNS
    values = [str(counts.tp), str(counts.tn), str(counts.fp), str(counts.fn)]
    values += [format_fixed(getattr(report, column)) for column in METRIC_COLUMNS]
    with open_output(args.output) as handle:
        handle.write(",".join(header) + "\n" + ",".join(values) + "\n")


def _synthetic_corpus(seed, benign, malware, catalog, families=SYNTH_FAMILIES, signal=5, noise=45, zero=None):
    if zero is None:
        zero = max(0, len(catalog) - signal - noise)
    names = catalog.names if signal + noise + zero == len(catalog) else None
    spec = planted_signal_spec(signal, noise, zero, names=names, families=tuple(families))
    return synth_generate(spec, (benign, malware), substream_int(seed, "synth"))


def run_bench(args, config):
    if args.input:
        dataset = read_csv(args.input)
    else:
        dataset = _synthetic_corpus(config.seed, args.benign, args.malware, load_catalog(config.catalog))
    datasets = {"dataset1": dataset}
    if args.families:
        datasets["dataset2"] = filter_families(dataset, args.families)
    classifiers = [CLASSIFIER_CHOICES[name] for name in args.classifiers]
    rows = run_experiment_matrix(datasets, args.feature_sets, classifiers, config.seed,
                                 config.experiment_settings())
    logging.info("Experiment matrix finished: %d rows, seed %d", len(rows), config.seed)
    write_report_csv(rows, args.output, include_timing=not args.no_timing, seed=config.seed)
    if args.json:
        write_report_json(rows, args.json, config.seed, include_timing=not args.no_timing)


def run_synth(args, config):
    catalog = load_catalog(config.catalog)
    write_csv(_synthetic_corpus(config.seed, args.benign, args.malware, catalog, args.families,
                                args.signal, args.noise, args.zero), args.output)


def _overrides(args):
    return {key: getattr(args, dest) for dest, key in FLAG_CONFIG_KEYS.items() if getattr(args, dest, None) is not None}


def cli_main(argv=None):
    """
    Parse arguments and run one subcommand.

    Args:
        argv (list, optional): Arguments without the program name; sys.argv[1:] when omitted.

    Returns:
        int: Exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        config = load_config(args.config, _overrides(args))
    except ConfigError as e:
        logging.error("Configuration error: %s", e)
        return EXIT_USAGE

    try:
        args.handler(args, config)
    except ConfigError as e:
        logging.error("Configuration error: %s", e)
        return EXIT_USAGE
    except (PermRankError, OSError) as e:
        logging.error("%s failed: %s", args.command, e)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
