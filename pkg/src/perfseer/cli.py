"""Command-line front end: scan, mine, prepare, train, evaluate, experiment, stats."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

from . import __version__
from .classifiers import ALGORITHMS, TrainedModel, canonical, coefficients, train
from .dataset import FEATURE_ATTRIBUTES, Dataset, validate_features
from .errors import PerfseerError, SchemaError
from .evaluation import (
    compute_metrics,
    confusion,
    correlation_matrix,
    cumulative_experiment,
    descriptive_stats,
    fmt,
    stats_csv,
)
from .miner import mine
from .patterns import PY2, PY3, RULES, detect, parse_source, resolve_rules
from .prep import DEFAULT_EXCLUDE_GLOBS, DEFAULT_OUTLIER_THRESHOLD, CleanseOptions, PrepParams, prepare
from .synthetic import threshold_dataset

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("perfseer")

EXIT_OK, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2
SEED_ENV = "PERFSEER_SEED"


@dataclass
class RunConfig:
    repo: str | None = None
    branch: str = "master"
    rules: list[str] = field(default_factory=lambda: sorted(RULES, key=lambda r: int(r[1:])))
    dialect: str = PY3
    exclude_globs: list[str] = field(default_factory=lambda: list(DEFAULT_EXCLUDE_GLOBS))
    outlier_threshold: float = DEFAULT_OUTLIER_THRESHOLD
    split: float = 0.7
    stratify: bool = True
    seed: int = 0
    jitter: float = 0.02
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    features: str = "cumulative"
    folds: int = 10
    dataset: str | None = None
    out: str = "out"

    def prep_params(self) -> PrepParams:
        return PrepParams(
            train_fraction=self.split,
            stratify=self.stratify,
            amplitude=self.jitter,
            cleanse=CleanseOptions(tuple(self.exclude_globs), self.outlier_threshold),
        )

    def feature_list(self) -> tuple[str, ...] | None:
        if self.features == "cumulative":
            return None
        return validate_features(f.strip() for f in self.features.split(",") if f.strip())

    def to_toml(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            lines.append(f"{f.name} = {_toml_value(value)}")
        return "\n".join(lines) + "\n"

    def save(self, out_dir: Path) -> None:
        (out_dir / "run_config.toml").write_text(self.to_toml(), encoding="utf-8")


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return json.dumps(str(value))


def _split_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _algorithms(text: str) -> list[str]:
    if text == "all":
        return list(ALGORITHMS)
    return [canonical(a) for a in _split_list(text)]


def load_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then PERFSEER_SEED (seed only), then flags."""
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    file_values = {}
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            file_values = tomllib.load(fh)
        unknown = set(file_values) - known
        if unknown:
            raise SchemaError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for key, value in file_values.items():
        setattr(cfg, key, value)
    if "seed" not in file_values and os.environ.get(SEED_ENV):
        cfg.seed = int(os.environ[SEED_ENV])
    flag_map = {
        "repo": "repo",
        "branch": "branch",
        "dialect": "dialect",
        "outlier_threshold": "outlier_threshold",
        "split": "split",
        "seed": "seed",
        "jitter": "jitter",
        "features": "features",
        "folds": "folds",
        "dataset": "dataset",
        "out": "out",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "rules", None):
        cfg.rules = sorted(resolve_rules(_split_list(args.rules)), key=lambda r: int(r[1:]))
    if getattr(args, "algo", None):
        cfg.algorithms = _algorithms(args.algo)
    if getattr(args, "exclude", None):
        cfg.exclude_globs = list(args.exclude)
    if getattr(args, "no_stratify", False):
        cfg.stratify = False
    cfg.algorithms = [canonical(a) for a in cfg.algorithms]
    return cfg


# -- commands -------------------------------------------------------------------


def _python_files(paths: Sequence[str]) -> tuple[list[Path], list[str]]:
    files, errors = [], []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            files.extend(sorted(q for q in path.rglob("*.py") if q.is_file()))
        elif path.is_file():
            files.append(path)
        else:
            errors.append(f"{p}: no such file or directory")
    return files, errors


def cmd_scan(args) -> int:
    rules = resolve_rules(_split_list(args.rules)) if args.rules else None
    files, errors = _python_files(args.paths)
    findings = []
    for path in files:
        try:
            text = path.read_text(encoding="utf-8")
            findings.extend(detect(parse_source(text, args.dialect, str(path)), rules))
        except (OSError, UnicodeDecodeError, SyntaxError) as exc:
            errors.append(f"{path}: {exc}")
    for f in findings:
        print(f.to_json() if args.format == "json" else f.to_text())
    for message in errors:
        print(f"error: {message}", file=sys.stderr)
    if errors:
        return EXIT_ERROR
    return EXIT_FINDINGS if findings else EXIT_OK


def cmd_mine(args) -> int:
    cfg = load_config(args)
    if not cfg.repo:
        raise SchemaError("--repo is required")
    ds = mine(cfg.repo, cfg.branch, cfg.rules, cfg.dialect)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ds.write(out / "dataset.csv")
    cfg.save(out)
    counts = ds.class_counts()
    print(f"{len(ds)} records ({counts['defective']} defective) -> {out / 'dataset.csv'}")
    return EXIT_OK


def _require_dataset(cfg: RunConfig) -> Dataset:
    if not cfg.dataset:
        raise SchemaError("--dataset is required")
    return Dataset.read(cfg.dataset)


def cmd_prepare(args) -> int:
    cfg = load_config(args)
    ds = _require_dataset(cfg)
    prepared = prepare(ds, cfg.seed, cfg.prep_params())
    out = Path(cfg.out)
    prepared.write(out)
    cfg.save(out)
    print(
        f"train {len(prepared.train)} {prepared.train.class_counts()}, "
        f"validation {len(prepared.validation)} {prepared.validation.class_counts()}"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args)
    ds = Dataset.read(args.train)
    features = cfg.feature_list() or FEATURE_ATTRIBUTES
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for algorithm in cfg.algorithms:
        model = train(algorithm, ds, features, seed=cfg.seed)
        path = out / f"model_{algorithm}.json"
        model.save(path)
        print(f"{algorithm}: {path}")
        if algorithm == "logistic":
            for row in coefficients(model):
                print(f"  {row.term:<32} {row.estimate: .6g}  se={row.std_error:.4g}  p={row.p_value:.3g}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ds = Dataset.read(args.data)
    lines = ["model,algorithm,tpr,acc,ppv,fpr,tp,fp,tn,fn"]
    for path in args.model:
        model = TrainedModel.load(path)
        cm = confusion(model.predict_dataset(ds), ds.labels())
        m = compute_metrics(cm)
        lines.append(
            f"{Path(path).name},{model.algorithm},{fmt(m.tpr)},{fmt(m.acc)},{fmt(m.ppv)},{fmt(m.fpr)},"
            f"{cm.tp},{cm.fp},{cm.tn},{cm.fn}"
        )
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = load_config(args)
    ds = _require_dataset(cfg)
    features = cfg.feature_list()
    sets = None if features is None else [(",".join(features), features)]
    report = cumulative_experiment(
        ds, cfg.seed, cfg.prep_params(), cfg.algorithms, feature_sets=sets, k=cfg.folds
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "roc_points.csv").write_text(report.roc_points_csv(), encoding="utf-8")
    (out / "report_metadata.json").write_text(
        json.dumps(report.metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    cfg.save(out)
    print(report.to_csv(), end="")
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = load_config(args)
    ds = _require_dataset(cfg)
    table = stats_csv(descriptive_stats(ds))
    corr = correlation_matrix(ds).to_csv()
    print(table, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.csv").write_text(table, encoding="utf-8")
        (out / "correlation.csv").write_text(corr, encoding="utf-8")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = load_config(args)
    ds = threshold_dataset(args.n, cfg.seed, noise=args.noise)
    ds.write(args.output)
    print(f"{len(ds)} records -> {args.output}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, seed=True, out=True, config=True):
    if config:
        p.add_argument("--config", help="TOML file of run settings; flags override it")
    if seed:
        p.add_argument("--seed", type=int, help=f"random seed (fallback: ${SEED_ENV}, then 0)")
    if out:
        p.add_argument("--out", help="output directory")


def _add_prep(p: argparse.ArgumentParser):
    p.add_argument("--split", type=float, help="training fraction (default 0.7)")
    p.add_argument("--no-stratify", action="store_true", help="split without stratifying by label")
    p.add_argument("--jitter", type=float, help="jitter amplitude a, factor ~ U(1-a, 1+a) (default 0.02)")
    p.add_argument("--outlier-threshold", type=float, help="max lines added+removed per record (default 10000)")
    p.add_argument(
        "--exclude", action="append", metavar="GLOB", help="non-production path glob (repeatable; replaces defaults)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfseer",
        description="Detect Python performance anti-patterns and predict performance-bug-injecting commits.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="report anti-pattern findings in Python files")
    p.add_argument("paths", nargs="+", help="files or directories (searched recursively for *.py)")
    p.add_argument("--rules", help="comma-separated rule ids, e.g. P1,P8 (default: all)")
    p.add_argument("--format", choices=("text", "json"), default="text", help="text or JSON lines")
    p.add_argument("--dialect", choices=(PY2, PY3), default=PY3, help="Python dialect for P3/P7")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("mine", help="mine a git branch into a labeled dataset CSV")
    p.add_argument("--repo", help="path to the git repository")
    p.add_argument("--branch", help="branch to walk (default master)")
    p.add_argument("--rules", help="rules used for injection labeling (default: all)")
    p.add_argument("--dialect", choices=(PY2, PY3), help="Python dialect for the detectors")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("prepare", help="cleanse, split, oversample and jitter a dataset")
    p.add_argument("--dataset", help="dataset CSV")
    _add_prep(p)
    _add_common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train classifiers on a (prepared) dataset")
    p.add_argument("--train", required=True, help="training CSV")
    p.add_argument("--algo", help="c45|nb|bayesnet|logreg|all, comma-separated (default all)")
    p.add_argument("--features", help="comma-separated attributes (default: all nine)")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score saved models on a labeled CSV")
    p.add_argument("--model", required=True, nargs="+", help="model JSON file(s)")
    p.add_argument("--data", required=True, help="labeled CSV, e.g. validation.csv")
    p.add_argument("--out", help="directory for metrics.csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run the cumulative-variable experiment")
    p.add_argument("--dataset", help="dataset CSV")
    p.add_argument("--algo", help="c45|nb|bayesnet|logreg|all, comma-separated (default all)")
    p.add_argument("--features", help="'cumulative' (default) or a comma-separated attribute list")
    p.add_argument("--folds", type=int, help="cross-validation folds (default 10)")
    _add_prep(p)
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("stats", help="descriptive statistics and correlation matrix")
    p.add_argument("--dataset", help="dataset CSV")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="write a synthetic dataset (label = lines_added > 50, with noise)")
    p.add_argument("output", help="CSV path to write")
    p.add_argument("--n", type=int, default=2000, help="number of records")
    p.add_argument("--noise", type=float, default=0.05, help="label flip probability")
    _add_common(p, out=False)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (PerfseerError, ValueError, OSError) as exc:
        print(f"perfseer {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
