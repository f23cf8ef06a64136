"""Command-line pipeline driver.

Subcommands: stats, probplot, corr, select, train, evaluate, predict.
Options resolve as flags > config file > defaults. Exit codes: 0 ok,
2 parse error, 3 bad argument, 4 statistical precondition, 5 model
mismatch, 6 empty partition. Every failure prints one machine-parseable
line: ``studentperf: error: <Kind>: <detail>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import errors as err
from . import nn, stats, training

PROG = "studentperf"

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_BAD_ARGUMENT = 3
EXIT_STAT_PRECONDITION = 4
EXIT_MODEL_MISMATCH = 5
EXIT_EMPTY_PARTITION = 6

_ERROR_CODES: list[tuple[type, int]] = [
    (err.MalformedRow, EXIT_PARSE),
    (err.UnknownCategory, EXIT_PARSE),
    (err.GradeOutOfRange, EXIT_PARSE),
    (err.EmptyInput, EXIT_PARSE),
    (err.CorruptPayload, EXIT_PARSE),
    (err.RatioOutOfRange, EXIT_BAD_ARGUMENT),
    (err.UnknownTarget, EXIT_BAD_ARGUMENT),
    (err.KTooLarge, EXIT_BAD_ARGUMENT),
    (err.NonPositiveLearningRate, EXIT_BAD_ARGUMENT),
    (err.TooFewSamples, EXIT_STAT_PRECONDITION),
    (err.ConstantColumn, EXIT_STAT_PRECONDITION),
    (err.ConstantInput, EXIT_STAT_PRECONDITION),
    (err.LengthMismatch, EXIT_STAT_PRECONDITION),
    (err.TooFewRows, EXIT_STAT_PRECONDITION),
    (err.VersionMismatch, EXIT_MODEL_MISMATCH),
    (err.ShapeMismatch, EXIT_MODEL_MISMATCH),
    (err.WidthMismatch, EXIT_MODEL_MISMATCH),
    (err.IncompatibleWidths, EXIT_MODEL_MISMATCH),
    (err.EmptySpec, EXIT_MODEL_MISMATCH),
    (err.StaleCache, EXIT_MODEL_MISMATCH),
    (err.NonFiniteInput, EXIT_MODEL_MISMATCH),
    (err.DatasetTooSmall, EXIT_EMPTY_PARTITION),
    (err.EmptyTrainingSet, EXIT_EMPTY_PARTITION),
    (err.EmptyTestSet, EXIT_EMPTY_PARTITION),
    (err.EmptyHistory, EXIT_EMPTY_PARTITION),
]


class CliError(Exception):
    """Argument-level failure with an explicit exit code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fail_code(exc: Exception) -> int:
    for cls, code in _ERROR_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_PARSE


# --- configuration ----------------------------------------------------------

_CONFIG_KEYS = {
    "data", "out", "seed", "train_ratio", "validation_ratio", "batch_size",
    "max_epochs", "learning_rate", "scale", "features", "selected_k",
    "grade_bins", "dropout_rate", "hidden_widths", "early_stop",
}


@dataclass
class PipelineConfig:
    """Flat run configuration with documented defaults."""

    data: str | None = None
    out: str = "out"
    seed: int = 42
    train_ratio: float = 0.7
    validation_ratio: float = 0.2
    batch_size: int = training.DEFAULT_BATCH_SIZE
    max_epochs: int = training.DEFAULT_MAX_EPOCHS
    learning_rate: float = training.DEFAULT_LEARNING_RATE
    scale: bool = True
    features: str = "all30"            # all30 | selected
    selected_k: int = 7
    grade_bins: tuple[int, ...] = ds.DEFAULT_GRADE_BINS
    dropout_rate: float = nn.DEFAULT_DROPOUT_RATE
    hidden_widths: tuple[int, ...] = nn.DEFAULT_HIDDEN_WIDTHS
    early_stop: dict = field(default_factory=lambda: {"kind": "none"})

    def validate(self) -> None:
        if self.data is None:
            raise CliError(EXIT_BAD_ARGUMENT, "no dataset path given "
                                              "(--data or config key 'data')")
        if not Path(self.data).exists():
            raise CliError(EXIT_PARSE, f"dataset file not found: {self.data}")
        if not 0.0 < self.train_ratio < 1.0:
            raise err.RatioOutOfRange(
                f"train_ratio={self.train_ratio} outside (0, 1)")
        if not 0.0 <= self.validation_ratio < 1.0:
            raise err.RatioOutOfRange(
                f"validation_ratio={self.validation_ratio} outside [0, 1)")
        if self.features not in ("all30", "selected"):
            raise CliError(EXIT_BAD_ARGUMENT,
                           f"features must be all30|selected, "
                           f"got {self.features!r}")
        edges = tuple(self.grade_bins)
        if not edges or list(edges) != sorted(set(edges)) or \
                edges[0] <= ds.GRADE_MIN or edges[-1] > ds.GRADE_MAX:
            raise CliError(EXIT_BAD_ARGUMENT,
                           f"grade_bins must be strictly increasing within "
                           f"({ds.GRADE_MIN}, {ds.GRADE_MAX}], got {edges}")

    def early_stop_rule(self) -> training.EarlyStop:
        es = self.early_stop
        kind = es.get("kind", "none")
        if kind == "loss_threshold":
            return training.EarlyStop("loss_threshold",
                                      tau=float(es["tau"]))
        if kind == "patience":
            return training.EarlyStop("patience",
                                      patience=int(es["patience"]))
        return training.EarlyStop()


def load_config_file(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError(EXIT_PARSE, f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"config file is not valid JSON: {exc}") \
            from None
    if not isinstance(doc, dict):
        raise CliError(EXIT_PARSE, "config file must hold a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise CliError(EXIT_BAD_ARGUMENT,
                       f"unknown config keys: {sorted(unknown)}")
    return doc


def build_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            if key in ("grade_bins", "hidden_widths"):
                value = tuple(value)
            setattr(cfg, key, value)
    overrides = {
        "data": getattr(args, "data", None),
        "out": getattr(args, "out", None),
        "seed": getattr(args, "seed", None),
        "train_ratio": getattr(args, "train_ratio", None),
        "validation_ratio": getattr(args, "validation_ratio", None),
        "batch_size": getattr(args, "batch_size", None),
        "max_epochs": getattr(args, "epochs", None),
        "learning_rate": getattr(args, "learning_rate", None),
        "features": getattr(args, "features", None),
        "selected_k": getattr(args, "selected_k", None),
        "dropout_rate": getattr(args, "dropout", None),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "bins", None) is not None:
        try:
            cfg.grade_bins = tuple(int(b) for b in args.bins.split(","))
        except ValueError:
            raise CliError(EXIT_BAD_ARGUMENT,
                           f"cannot parse --bins {args.bins!r}") from None
    if getattr(args, "no_scale", False):
        cfg.scale = False
    return cfg


# --- shared helpers ---------------------------------------------------------

def _require_data(args) -> str:
    data = getattr(args, "data", None)
    if data is None and getattr(args, "config", None):
        data = load_config_file(args.config).get("data")
    if data is None:
        raise CliError(EXIT_BAD_ARGUMENT, "no dataset path given (--data)")
    if not Path(data).exists():
        raise CliError(EXIT_PARSE, f"dataset file not found: {data}")
    return data


def _out_dir(args, cfg: PipelineConfig | None = None) -> Path:
    out = getattr(args, "out", None) or (cfg.out if cfg else "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _print_json(doc) -> None:
    print(json.dumps(doc, indent=2))


# --- subcommands ------------------------------------------------------------

def cmd_stats(args) -> int:
    matrix = ds.load_matrix(_require_data(args))
    requested = args.col or list(ds.NUMERIC_COLUMNS)
    variant = args.variant
    summaries = []
    for col in requested:
        if col not in matrix.columns:
            raise CliError(EXIT_BAD_ARGUMENT, f"unknown column: {col}")
        if col not in ds.NUMERIC_COLUMNS:
            raise CliError(EXIT_BAD_ARGUMENT,
                           f"column {col} is categorical; stats covers "
                           f"numeric columns")
        summary = stats.moments(matrix.column(col), variant=variant)
        summaries.append({"column": col, **summary.to_dict()})
    _print_json(summaries)
    return EXIT_OK


def cmd_probplot(args) -> int:
    matrix = ds.load_matrix(_require_data(args))
    col = args.col
    if col not in matrix.columns:
        raise CliError(EXIT_BAD_ARGUMENT, f"unknown column: {col}")
    plot = stats.probplot(matrix.column(col))
    out = _out_dir(args)
    csv_path = out / f"probplot_{col}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("theoretical_quantile,ordered_value\n")
        for q, v in zip(plot.theoretical_quantiles, plot.ordered_sample):
            fh.write(f"{q!r},{v!r}\n")
    json_path = out / f"probplot_{col}.json"
    sidecar = {"column": col, "n": int(plot.ordered_sample.size),
               **plot.fit_dict()}
    json_path.write_text(json.dumps(sidecar, indent=2) + "\n",
                         encoding="utf-8")
    _print_json(sidecar)
    return EXIT_OK


def cmd_corr(args) -> int:
    matrix = ds.load_matrix(_require_data(args))
    corr = stats.correlation_matrix(matrix)
    out = _out_dir(args)
    path = out / "correlation.csv"
    corr.write_csv(path)
    _print_json({"columns": len(corr.labels),
                 "constant_columns": list(corr.constant_columns),
                 "csv": str(path)})
    return EXIT_OK


def cmd_select(args) -> int:
    matrix = ds.load_matrix(_require_data(args))
    corr = stats.correlation_matrix(matrix)
    mode = {"signed": "signed_desc", "absolute": "absolute_desc"}[args.mode]
    if args.agg == "single":
        ranking = stats.select_features(
            corr, mode=mode, aggregation="single_target",
            k=args.k, single_target=args.target)
    else:
        ranking = stats.select_features(corr, mode=mode,
                                        aggregation=args.agg, k=args.k)
    doc = ranking.to_dict()
    doc["audit"] = stats.audit_overlap(ranking)
    _print_json(doc)
    return EXIT_OK


@dataclass
class _Prepared:
    """Everything the train/evaluate path shares."""

    split: ds.SplitDataset
    feature_names: tuple[str, ...]
    scaler: ds.MinMaxScale | None
    matrix: ds.DataMatrix


def _prepare(cfg: PipelineConfig,
             feature_names: tuple[str, ...] | None = None,
             scaler_bounds: list | None = None) -> _Prepared:
    matrix = ds.load_matrix(cfg.data)
    labeled = ds.make_labeled(matrix, cfg.grade_bins)
    if feature_names is None:
        if cfg.features == "selected":
            corr = stats.correlation_matrix(matrix)
            ranking = stats.select_features(
                corr, mode="signed_desc", aggregation="single_target",
                k=cfg.selected_k, single_target="G3")
            feature_names = tuple(ranking.feature_names())
        else:
            feature_names = labeled.features.columns
    if feature_names != labeled.features.columns:
        labeled = ds.LabeledDataset(labeled.features.select(feature_names),
                                    labeled.labels, labeled.n_classes)
    spl = ds.split(labeled, cfg.train_ratio, cfg.validation_ratio, cfg.seed)
    scaler = None
    if scaler_bounds is not None:
        mins = np.array([b[0] for b in scaler_bounds])
        maxs = np.array([b[1] for b in scaler_bounds])
        scaler = ds.MinMaxScale(feature_names, mins, maxs)
    elif cfg.scale:
        scaler = ds.MinMaxScale.fit(spl.train.features)
    if scaler is not None:
        def rescale(part: ds.LabeledDataset) -> ds.LabeledDataset:
            return ds.LabeledDataset(scaler.transform(part.features),
                                     part.labels, part.n_classes)
        spl = ds.SplitDataset(
            train=rescale(spl.train),
            validation=rescale(spl.validation) if spl.validation.n_rows
            else spl.validation,
            test=rescale(spl.test),
            seed=spl.seed, train_ratio=spl.train_ratio,
            validation_ratio=spl.validation_ratio, indices=spl.indices)
    return _Prepared(spl, feature_names, scaler, matrix)


def _pipeline_doc(cfg: PipelineConfig, prep: _Prepared) -> dict:
    return {
        "scheme_version": ds.DEFAULT_SCHEME.version,
        "grade_bins": list(cfg.grade_bins),
        "bin_labels": list(ds.bin_labels(cfg.grade_bins)),
        "features": cfg.features,
        "feature_names": list(prep.feature_names),
        "scaler_bounds": prep.scaler.bounds() if prep.scaler else None,
        "split": {"seed": cfg.seed, "train_ratio": cfg.train_ratio,
                  "validation_ratio": cfg.validation_ratio},
        "train": {"batch_size": cfg.batch_size, "max_epochs": cfg.max_epochs,
                  "learning_rate": cfg.learning_rate, "seed": cfg.seed,
                  "dropout_rate": cfg.dropout_rate,
                  "hidden_widths": list(cfg.hidden_widths)},
        "data": str(cfg.data),
    }


def cmd_train(args) -> int:
    cfg = build_config(args)
    cfg.validate()
    prep = _prepare(cfg)
    out = _out_dir(args, cfg)
    specs = nn.default_architecture(len(prep.feature_names),
                                    n_classes=prep.split.train.n_classes,
                                    dropout_rate=cfg.dropout_rate,
                                    hidden=cfg.hidden_widths)
    net = nn.init_network(specs, cfg.seed)
    tcfg = training.TrainConfig(batch_size=cfg.batch_size,
                                max_epochs=cfg.max_epochs,
                                learning_rate=cfg.learning_rate,
                                seed=cfg.seed,
                                early_stop=cfg.early_stop_rule())
    net, history = training.train(net, prep.split, tcfg)
    nn.write_network(net, out / "model.json")
    training.export_history(history, out / "history.csv")
    ds.write_split_manifest(prep.split, out / "split.json")
    prep.matrix.write_csv(out / "encoded.csv")
    (out / "pipeline.json").write_text(
        json.dumps(_pipeline_doc(cfg, prep), indent=2) + "\n",
        encoding="utf-8")
    last = history.records[-1]
    _print_json({
        "epochs": len(history),
        "stop_reason": history.stop_reason,
        "final_train_loss": last.train_loss,
        "final_val_loss": last.val_loss,
        "model": str(out / "model.json"),
        "history": str(out / "history.csv"),
    })
    return EXIT_OK


def _load_pipeline_doc(args) -> tuple[nn.Network, dict]:
    model_path = Path(args.model)
    if not model_path.exists():
        raise CliError(EXIT_PARSE, f"model file not found: {args.model}")
    net = nn.load_network(model_path)
    pipeline_path = Path(getattr(args, "pipeline", None)
                         or model_path.parent / "pipeline.json")
    if not pipeline_path.exists():
        raise CliError(EXIT_PARSE,
                       f"pipeline manifest not found: {pipeline_path}")
    doc = json.loads(pipeline_path.read_text(encoding="utf-8"))
    return net, doc


def cmd_evaluate(args) -> int:
    net, pipe = _load_pipeline_doc(args)
    cfg = PipelineConfig(
        data=getattr(args, "data", None) or pipe["data"],
        seed=pipe["split"]["seed"],
        train_ratio=pipe["split"]["train_ratio"],
        validation_ratio=pipe["split"]["validation_ratio"],
        grade_bins=tuple(pipe["grade_bins"]),
        features=pipe["features"],
    )
    cfg.validate()
    prep = _prepare(cfg, feature_names=tuple(pipe["feature_names"]),
                    scaler_bounds=pipe["scaler_bounds"])
    if net.in_width != len(prep.feature_names):
        raise err.WidthMismatch(
            f"model expects {net.in_width} features, dataset provides "
            f"{len(prep.feature_names)}")
    report = training.evaluate(net, prep.split.test)
    text = training.export_eval(report)
    print(text)
    if getattr(args, "out", None):
        training.export_eval(report, _out_dir(args) / "evaluation.json")
    return EXIT_OK


def cmd_predict(args) -> int:
    net, pipe = _load_pipeline_doc(args)
    rows_path = Path(args.rows)
    if not rows_path.exists():
        raise CliError(EXIT_PARSE, f"rows file not found: {args.rows}")
    features = ds.parse_prediction_rows(rows_path)
    names = tuple(pipe["feature_names"])
    features = features.select(names)
    if pipe["scaler_bounds"] is not None:
        mins = np.array([b[0] for b in pipe["scaler_bounds"]])
        maxs = np.array([b[1] for b in pipe["scaler_bounds"]])
        features = ds.MinMaxScale(names, mins, maxs).transform(features)
    if net.in_width != features.n_cols:
        raise err.WidthMismatch(
            f"model expects {net.in_width} features, rows provide "
            f"{features.n_cols}")
    labels = pipe["bin_labels"]
    results = []
    for i, row in enumerate(features.values):
        cls = nn.predict_class(net, row)
        results.append({"row": i, "class": cls, "label": labels[cls]})
    _print_json(results)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="dataset CSV path")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="master seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Student-performance statistics and MLP pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="per-column moment summaries")
    _add_common(p)
    p.add_argument("--col", action="append",
                   help="column to summarize (repeatable; default: all "
                        "numeric columns)")
    p.add_argument("--variant", choices=("biased", "bias_corrected"),
                   default=stats.DEFAULT_VARIANT)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("probplot", help="normal probability plot data")
    _add_common(p)
    p.add_argument("--col", required=True)
    p.set_defaults(func=cmd_probplot)

    p = sub.add_parser("corr", help="labeled correlation matrix CSV")
    _add_common(p)
    p.set_defaults(func=cmd_corr)

    p = sub.add_parser("select", help="correlation-ranked feature selection")
    _add_common(p)
    p.add_argument("--mode", choices=("signed", "absolute"), default="signed")
    p.add_argument("--agg", choices=("mean", "max", "single"),
                   default="single")
    p.add_argument("--target", default="G3",
                   help="target column for --agg single")
    p.add_argument("--k", type=int, default=7)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train the classifier end to end")
    _add_common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--train-ratio", type=float, dest="train_ratio")
    p.add_argument("--validation-ratio", type=float, dest="validation_ratio")
    p.add_argument("--features", choices=("all30", "selected"))
    p.add_argument("--selected-k", type=int, dest="selected_k")
    p.add_argument("--dropout", type=float)
    p.add_argument("--bins", help="comma-separated grade bin edges, "
                                  "e.g. 10,16")
    p.add_argument("--no-scale", action="store_true",
                   help="disable min-max feature scaling")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved model on the "
                                        "held-out test partition")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--pipeline", help="pipeline manifest "
                                      "(default: next to the model)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify attribute rows")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--pipeline")
    p.add_argument("--rows", required=True, help="CSV of rows to classify")
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"{PROG}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.code
    except err.StudentPerfError as exc:
        print(f"{PROG}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _fail_code(exc)
    except FileNotFoundError as exc:
        print(f"{PROG}: error: FileNotFound: {exc}", file=sys.stderr)
        return EXIT_PARSE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
