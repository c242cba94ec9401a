"""Command line front end: stats, split, fit, predict, evaluate, search.

Every run is reproducible from its flags and seeds; there is no hidden
state and no timestamps in any output.  A JSON config file may supply any
flag's value (keyed by the flag's name with dashes as underscores);
explicit command line flags win.

Exit codes: 0 success, 2 usage or input error, 3 runtime/model error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import data as data_mod
from . import metrics as metrics_mod
from . import search as search_mod
from .errors import ColdStartError, ParseError, TrainingDivergedError
from .model import FactorModel, Hyperparams, fit
from .persistence import load_model, save_model
from .pmf import pmf_fit
from .scores import ScoreSet
from .svgplot import scatter_svg


@dataclass
class RunConfig:
    """Resolved options shared by the dataset-consuming commands."""

    input: Path
    fmt: data_mod.RatingFormat
    scores: Optional[ScoreSet]
    test_fraction: float
    split_seed: int
    seed: int
    threads: int
    out_dir: Path
    grid_n: int
    top_n: int
    tau: Optional[float]
    theta: float


def _dataset_flags(parser: argparse.ArgumentParser, with_input: bool = True) -> None:
    if with_input:
        parser.add_argument("--input", required=True, help="rating file to read")
    parser.add_argument(
        "--format",
        default="user,item,rating",
        help="order of the leading columns (permutation of user,item,rating)",
    )
    parser.add_argument(
        "--delimiter",
        default="tab",
        help="field delimiter: tab, comma, space, whitespace or a literal character",
    )
    parser.add_argument("--header", action="store_true", help="skip the first line")
    parser.add_argument("--scores", default=None, help="explicit comma-separated score values")
    parser.add_argument("--test-fraction", type=float, default=0.0, help="held-out fraction in (0,1); 0 keeps everything in train")
    parser.add_argument("--split-seed", type=int, default=0, help="seed of the train/test shuffle")


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="seed for model training / search")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (1 = fully sequential)")
    parser.add_argument("--out-dir", default=".", help="directory for output files")
    parser.add_argument("--grid-n", type=int, default=20, help="number of reliability thresholds")
    parser.add_argument("--top-n", type=int, default=10, help="recommendation list length for mAP")
    parser.add_argument("--tau", type=float, default=None, help="relevance threshold in score units (default: score midpoint)")
    parser.add_argument("--theta", type=float, default=0.0, help="reliability threshold for predict / mAP filtering")
    parser.add_argument("--config", default=None, help="JSON file with default values for any flag")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resbemf", description=__doc__.splitlines()[0])
    parser.command_parsers = {}  # type: ignore[attr-defined]
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="print dataset statistics as JSON")
    _dataset_flags(p_stats)
    _common_flags(p_stats)
    p_stats.set_defaults(func=cmd_stats)

    p_split = sub.add_parser("split", help="export a train/test partition (and folds) as CSV")
    _dataset_flags(p_split)
    _common_flags(p_split)
    p_split.add_argument("--folds", type=int, default=0, help="also assign this many cross-validation folds")
    p_split.add_argument("--out", default="partition.csv", help="output CSV name (inside --out-dir)")
    p_split.set_defaults(func=cmd_split)

    p_fit = sub.add_parser("fit", help="train a model and write it as JSON")
    _dataset_flags(p_fit)
    _common_flags(p_fit)
    p_fit.add_argument("--model-type", choices=("resbemf", "pmf"), default="resbemf")
    p_fit.add_argument("--factors", type=int, default=6, help="latent dimensionality k")
    p_fit.add_argument("--gamma", type=float, default=0.1, help="L2 regularization")
    p_fit.add_argument("--eta", type=float, default=0.003, help="learning rate")
    p_fit.add_argument("--epochs", type=int, default=100, help="training epochs m")
    p_fit.add_argument("--model-out", default="model.json", help="model file name (inside --out-dir)")
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="predict one (user, item) pair")
    _common_flags(p_pred)
    p_pred.add_argument("--model", required=True, help="model JSON file")
    p_pred.add_argument("--user", required=True)
    p_pred.add_argument("--item", required=True)
    p_pred.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("evaluate", help="per-threshold metrics CSV plus a JSON summary")
    _dataset_flags(p_eval)
    _common_flags(p_eval)
    p_eval.add_argument("--model", required=True, help="model JSON file")
    p_eval.add_argument("--metrics-out", default="metrics.csv", help="per-threshold CSV name (inside --out-dir)")
    p_eval.add_argument("--summary-out", default="summary.json", help="summary JSON name (inside --out-dir)")
    p_eval.set_defaults(func=cmd_evaluate)

    p_search = sub.add_parser("search", help="random hyperparameter search with Pareto front")
    _dataset_flags(p_search)
    _common_flags(p_search)
    p_search.add_argument("--space", required=True, help="JSON search space (lists per hyperparameter)")
    p_search.add_argument("--folds", type=int, default=5, help="cross-validation folds")
    p_search.set_defaults(func=cmd_search)

    parser.command_parsers.update(  # type: ignore[attr-defined]
        stats=p_stats, split=p_split, fit=p_fit, predict=p_pred, evaluate=p_eval, search=p_search
    )
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse argv, letting a --config JSON file supply defaults."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    path = Path(args.config)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"config {path} must be a JSON object")
    valid = set(vars(args))
    overrides = {}
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if dest not in valid:
            raise ValueError(f"config {path} has unknown field {key!r}")
        overrides[dest] = value
    # defaults must land on the subcommand's parser: subparsers re-apply
    # their own defaults into a fresh namespace on every parse
    parser.command_parsers[args.command].set_defaults(**overrides)  # type: ignore[attr-defined]
    return parser.parse_args(argv)  # explicit flags still win over config values


# -- shared loading ---------------------------------------------------------


def _resolve_delimiter(name: str) -> Optional[str]:
    if name in data_mod.DELIMITER_NAMES:
        return data_mod.DELIMITER_NAMES[name]
    if len(name) == 1:
        return name
    raise ValueError(f"bad delimiter {name!r}: use tab, comma, space, whitespace or one character")


def _run_config(args: argparse.Namespace) -> RunConfig:
    columns = tuple(c.strip() for c in args.format.split(","))
    fmt = data_mod.RatingFormat(delimiter=_resolve_delimiter(args.delimiter), columns=columns, header=args.header)
    scores = None
    if args.scores:
        scores = ScoreSet(tuple(float(v) for v in args.scores.split(",")))
    if args.threads < 1:
        raise ValueError("--threads must be at least 1")
    return RunConfig(
        input=Path(getattr(args, "input", ".")),
        fmt=fmt,
        scores=scores,
        test_fraction=args.test_fraction,
        split_seed=args.split_seed,
        seed=args.seed,
        threads=args.threads,
        out_dir=Path(args.out_dir),
        grid_n=args.grid_n,
        top_n=args.top_n,
        tau=args.tau,
        theta=args.theta,
    )


def _load_dataset(cfg: RunConfig) -> data_mod.RatingsDataset:
    if not cfg.input.exists():
        raise FileNotFoundError(f"input file not found: {cfg.input}")
    dataset = data_mod.parse_ratings(cfg.input, cfg.fmt, score_set=cfg.scores)
    if cfg.test_fraction:
        dataset = data_mod.split(dataset, cfg.test_fraction, cfg.split_seed)
    return dataset


# -- commands ---------------------------------------------------------------


def cmd_stats(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    report = data_mod.stats(_load_dataset(cfg))
    print(json.dumps(dataclasses.asdict(report)))
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    if not 0.0 < cfg.test_fraction < 1.0:
        raise ValueError("split requires --test-fraction strictly between 0 and 1")
    dataset = _load_dataset(cfg)
    folds = data_mod.make_folds(dataset, args.folds, cfg.seed) if args.folds else None
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.out_dir / args.out
    data_mod.write_partition_csv(dataset, out, folds=folds)
    print(f"wrote {out}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    dataset = _load_dataset(cfg)
    hp = Hyperparams(k=args.factors, gamma=args.gamma, eta=args.eta, m=args.epochs, seed=cfg.seed)
    if args.model_type == "resbemf":
        model = fit(dataset, hp)
    else:
        model = pmf_fit(dataset, hp)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.out_dir / args.model_out
    save_model(model, out)
    print(f"wrote {out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    theta = args.theta
    if not 0.0 <= theta <= 1.0:
        raise ValueError("--theta must lie in [0, 1]")
    result = {"user": args.user, "item": args.item, "theta": theta, "cold_start": False}
    try:
        if isinstance(model, FactorModel):
            dist = model.predict_distribution(args.user, args.item)
            estimate, reliability = model.score_set.value(dist.mode_index), dist.reliability
        else:
            estimate, reliability = model.predict(args.user, args.item), 1.0
    except ColdStartError:
        est, _, reliability, _ = model.default_prediction_columns()
        estimate = float(est)
        result["cold_start"] = True
    withheld = reliability < theta
    result["prediction"] = None if withheld else estimate
    result["reliability"] = reliability
    print(json.dumps(result))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    model = load_model(args.model)
    dataset = _load_dataset(cfg)
    test = dataset.test_triples()
    if len(test) == 0:
        raise ValueError("no test ratings: pass --test-fraction in (0, 1)")
    report = metrics_mod.evaluate_model(
        model,
        test,
        metrics_mod.ThresholdGrid(cfg.grid_n),
        n_top=cfg.top_n,
        tau=cfg.tau,
        map_theta=cfg.theta,
        on_cold="default",
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = cfg.out_dir / args.metrics_out
    summary_path = cfg.out_dir / args.summary_out
    metrics_mod.write_report_csv(report, metrics_path)
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(metrics_mod.report_summary(report)))
        fh.write("\n")
    print(f"wrote {metrics_path} and {summary_path}")
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    dataset = _load_dataset(cfg)
    with open(args.space, "r", encoding="utf-8") as fh:
        space = search_mod.SearchSpace.from_json_dict(json.load(fh))
    result = search_mod.random_search(
        space,
        dataset,
        args.folds,
        metrics_mod.ThresholdGrid(cfg.grid_n),
        cfg.seed,
        threads=cfg.threads,
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    candidates_path = cfg.out_dir / "candidates.csv"
    front_path = cfg.out_dir / "front.csv"
    svg_path = cfg.out_dir / "front.svg"
    search_mod.write_candidates_csv(result, args.folds, candidates_path)
    search_mod.write_front_csv(result, front_path)
    points = [(c.objectives.coverage, c.objectives.one_minus_mae) for c in result.candidates if not c.failed]
    front = [(c.objectives.coverage, c.objectives.one_minus_mae) for c in result.front]
    with open(svg_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(scatter_svg(points, front, title="random search objectives"))
    n_failed = sum(c.failed for c in result.candidates)
    print(
        f"evaluated {len(result.candidates)} candidates ({n_failed} failed), "
        f"front size {len(result.front)}; wrote {candidates_path}, {front_path}, {svg_path}"
    )
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, list(sys.argv[1:] if argv is None else argv))
        return args.func(args)
    except (ParseError, FileNotFoundError, IsADirectoryError, ValueError, json.JSONDecodeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (TrainingDivergedError, ColdStartError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
