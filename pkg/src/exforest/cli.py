"""Command line entry point: ``exforest {fit,predict,explain,experiment}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .data import CLASSIFICATION, REGRESSION, DataError, binarize_by_mean, equal_width_bin, load_csv, read_features
from .explain import predict_cumulative, predict_top_k
from .forest import Forest, HyperParams, fit
from .harness import ConfigError, ExperimentConfig, ExperimentError, run_experiment
from .weights import forest_weights_many

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("exforest")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _max_features(text):
    if text in ("all", "sqrt"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'all', 'sqrt' or a fraction") from None


def _add_selection(p):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--top-k", type=int, help="use only the k highest-weighted training examples")
    group.add_argument("--cumulative-c", type=float, help="use the shortest prefix with cumulative weight >= c")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="exforest", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("fit", help="train a forest and save it as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--task", choices=[REGRESSION, CLASSIFICATION], default=REGRESSION)
    p.add_argument(
        "--derive",
        choices=["none", "binarize_by_mean", "equal_width_bin"],
        default="none",
        help="turn regression targets into class labels",
    )
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--max-features", type=_max_features, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON path")

    for name, help_text in (
        ("predict", "write one prediction per row as CSV"),
        ("explain", "write the example-based explanation of every row as JSON"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        _add_selection(p)
        p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("experiment", help="run a cross-validated sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="directory for report.json and table.csv")
    p.add_argument("--seed", type=int, help="override the config seed")
    return parser


def _cmd_fit(args):
    ds = load_csv(args.data, args.target, REGRESSION if args.derive != "none" else args.task)
    if args.derive == "binarize_by_mean":
        ds = ds.with_labels(binarize_by_mean(ds.labels.values[:, 0]))
    elif args.derive == "equal_width_bin":
        ds = ds.with_labels(equal_width_bin(ds.labels.values[:, 0], args.bins))
    try:
        params = HyperParams(
            n_trees=args.n_trees,
            min_samples_leaf=args.min_samples_leaf,
            max_features=args.max_features,
            seed=args.seed,
            task=ds.task,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    forest = fit(ds, params)
    forest.save(args.out)
    log.info("wrote %d trees to %s", forest.n_trees, args.out)


def _load_model_and_rows(args):
    if args.top_k is not None and args.top_k < 1:
        raise UsageError("--top-k must be >= 1")
    if args.cumulative_c is not None and not 0.0 < args.cumulative_c <= 1.0:
        raise UsageError("--cumulative-c must lie in (0, 1]")
    try:
        forest = Forest.load(args.model)
    except FileNotFoundError:
        raise DataError(f"no such model file: {args.model}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise DataError(f"{args.model}: not a valid model ({e})") from None
    names = forest.feature_names or tuple(f"f{j}" for j in range(forest.n_features))
    X = read_features(args.data, names)
    return forest, X


def _predict_rows(forest, X, args):
    for w in forest_weights_many(forest, X):
        if args.top_k is not None:
            yield predict_top_k(w, forest.labels, args.top_k)
        elif args.cumulative_c is not None:
            yield predict_cumulative(w, forest.labels, args.cumulative_c)
        else:
            # c = 1 keeps the full weight vector
            yield predict_cumulative(w, forest.labels, 1.0)


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_predict(args):
    forest, X = _load_model_and_rows(args)
    lines = []
    if forest.label_kind == REGRESSION:
        lines.append("prediction")
        for pred, _ in _predict_rows(forest, X, args):
            lines.append(repr(float(pred[0])))
    else:
        names = list(forest.labels.class_names)
        lines.append(",".join(["prediction"] + [f"p_{c}" for c in names]))
        for pred, _ in _predict_rows(forest, X, args):
            lines.append(",".join([names[int(np.argmax(pred))]] + [repr(float(v)) for v in pred]))
    _emit("\n".join(lines) + "\n", args.out)


def _cmd_explain(args):
    forest, X = _load_model_and_rows(args)
    rows = []
    for r, (pred, expl) in enumerate(_predict_rows(forest, X, args)):
        rows.append(
            {
                "row": r,
                "prediction": pred.tolist(),
                "explanation": expl.to_dict(forest.example_ids),
            }
        )
    doc = {"label_kind": forest.label_kind, "class_names": list(forest.labels.class_names), "rows": rows}
    _emit(json.dumps(doc, indent=2) + "\n", args.out)


def _cmd_experiment(args):
    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    report = run_experiment(config)
    report.write(args.out)
    log.info("wrote %s/report.json and %s/table.csv", args.out, args.out)


COMMANDS = {"fit": _cmd_fit, "predict": _cmd_predict, "explain": _cmd_explain, "experiment": _cmd_experiment}


def cli_main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ExperimentError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
