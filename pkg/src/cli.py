"""
Command-line entry point.

    fraudmix flat            --data train.csv [--validation val.csv] --seed 7 [--save-models]
    fraudmix mixed           --data train.csv --seed 7 --k 2,3,4,5
    fraudmix select-features --data train.csv
    fraudmix enumerate       [--rule MV|OR] [--roster NB,KNN,...]
    fraudmix metrics         --predictions preds.csv
    fraudmix synthetic       --kind clustered --seed 3 --out data/
    fraudmix predict         --models results/models --data test.csv

Exit codes: 0 success, 1 finished with recorded failures (or unusable data),
2 usage or configuration error.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from dotenv import load_dotenv

from src.config import build_config, read_specs
from src.ensemble import enumerate_ensembles
from src.errors import ConfigError, FraudMixError
from src.graph import run_experiment
from src.learners import load_bundle
from src.reporting import composition_frame, render_table, write_frame
from src.state import ROSTER_ORDER, ModelSpec, ReportRow
from src.tools.dataset import apply_scaler, fit_scaler, load_csv
from src.tools.feature_select import select_features, verdict_table
from src.tools.metrics import evaluate_predictions
from src.tools.synthetic import GENERATORS, generate, write_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


def configure_logging(level: Optional[str]) -> None:
    load_dotenv()
    name = (level or os.getenv("FRAUDMIX_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO), format=LOG_FORMAT, force=True)


def _k_values(raw: Optional[List[str]]) -> Optional[List[int]]:
    if not raw:
        return None
    try:
        return [int(part) for chunk in raw for part in chunk.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"--k expects integers, got {raw}") from exc


def _csv_list(raw: Optional[str]) -> Optional[List[str]]:
    return [item.strip() for item in raw.split(",") if item.strip()] if raw else None


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--data", help="training CSV (header row, numeric features, 0/1 label)")
    common.add_argument("--validation", help="validation CSV with the same columns")
    common.add_argument("--label-column", dest="label_column", help="label column name (default Class)")
    common.add_argument("--seed", type=int, help="random seed (required for flat and mixed)")
    common.add_argument("--k", action="append", help="cluster count(s); repeat or comma-separate")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="parallel workers")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")

    parser = argparse.ArgumentParser(
        prog="fraudmix",
        description="Cluster-then-classify credit card fraud detection experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--specs", help="tuned_models.txt of an earlier run; its models skip the search")
    sweep.add_argument(
        "--save-models", dest="save_models", action="store_const", const=True,
        help="fit each tuned model on the whole training set and save it under OUT/models",
    )

    sub.add_parser("flat", parents=[common, sweep], help="individual models and ensembles without clustering")
    sub.add_parser("mixed", parents=[common, sweep], help="K-means partitioning, then one predictor per cluster")
    sub.add_parser("select-features", parents=[common], help="majority-vote feature relevance")

    enum = sub.add_parser("enumerate", parents=[common], help="print the ensemble composition table")
    enum.add_argument("--rule", choices=["MV", "OR"], help="only this rule (default: both)")
    enum.add_argument("--roster", help="comma-separated model acronyms (default: full roster)")

    met = sub.add_parser("metrics", parents=[common], help="metrics of a predictions CSV")
    met.add_argument("--predictions", required=True, help="CSV with predicted and actual columns")
    met.add_argument("--predicted-column", dest="predicted_column", default="predicted")
    met.add_argument("--actual-column", dest="actual_column", default="actual")

    syn = sub.add_parser("synthetic", parents=[common], help="write a synthetic dataset CSV")
    syn.add_argument("--kind", choices=list(GENERATORS), default="clustered")
    syn.add_argument("--n", type=int, help="number of objects")

    pred = sub.add_parser("predict", parents=[common], help="score a labelled CSV with models saved by a sweep")
    pred.add_argument("--models", required=True, help="models directory written by --save-models")

    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "data": args.data,
        "validation": args.validation,
        "label_column": args.label_column,
        "seed": args.seed,
        "k_values": _k_values(args.k),
        "out": args.out,
        "jobs": args.jobs,
        "specs": getattr(args, "specs", None),
        "save_models": getattr(args, "save_models", None),
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _run_sweep(args: argparse.Namespace) -> int:
    config = build_config(args.config, _overrides(args))
    final_state = run_experiment(config, args.command)
    for path in final_state.get("outputs", []):
        print(path)
    if not final_state.get("reports"):
        print("error: no report produced; see manifest.json", file=sys.stderr)
        return EXIT_FAILURES
    return EXIT_FAILURES if final_state.get("failures") else EXIT_OK


def _run_select_features(args: argparse.Namespace) -> int:
    config = build_config(args.config, _overrides(args))
    if not config.data:
        raise ConfigError("select-features needs --data")
    data = load_csv(config.data, config.label_column, config.exclude_columns)
    data = apply_scaler(fit_scaler(data), data)
    seed = config.seed or 0
    verdict = select_features(data, bins=config.mi_bins, forest_config=ModelSpec(family="RF", seed=seed), seed=seed)
    table = verdict_table(verdict)
    print(table.to_string(index=False))
    if args.out:
        print(write_frame(Path(config.out) / "feature_selection.csv", table))
    return EXIT_OK


def _run_enumerate(args: argparse.Namespace) -> int:
    pool = _csv_list(args.roster) or list(ROSTER_ORDER)
    rules = [args.rule] if args.rule else ["MV", "OR"]
    specs = [spec for rule in rules for spec in enumerate_ensembles(pool, rule)]
    frame = composition_frame(specs)
    print(frame.to_csv(index=False, lineterminator="\n"), end="")
    if args.out:
        write_frame(Path(args.out) / "ensembles.csv", frame)
    return EXIT_OK


def _run_metrics(args: argparse.Namespace) -> int:
    frame = pd.read_csv(args.predictions)
    for column in (args.predicted_column, args.actual_column):
        if column not in frame.columns:
            raise ConfigError(f"predictions file has no column '{column}'")
    row = evaluate_predictions(frame[args.predicted_column].to_numpy(), frame[args.actual_column].to_numpy())
    print(render_table([ReportRow(label=Path(args.predictions).stem, kind="model", composition="", metrics=row)], "Metrics"))
    c = row.counts
    print(f"tp={c.tp} tn={c.tn} fp={c.fp} fn={c.fn} f1={'undefined' if row.f1 is None else f'{row.f1:.6f}'}")
    return EXIT_OK


def _run_synthetic(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 0
    data = generate(args.kind, seed, args.n)
    out = Path(args.out or ".") / f"synthetic_{args.kind}_seed{seed}.csv"
    print(write_csv(data, out, args.label_column or "Class"))
    return EXIT_OK


def _run_predict(args: argparse.Namespace) -> int:
    models_dir = Path(args.models)
    paths = sorted(models_dir.glob("*.joblib"))
    if not paths:
        raise ConfigError(f"no saved models (*.joblib) in {models_dir}")
    bundles = {path.stem: load_bundle(path) for path in paths}

    # the sweep writes tuned_models.txt next to models/; it fixes the order and is checked
    order = list(bundles)
    specs_path = models_dir.parent / "tuned_models.txt"
    if specs_path.exists():
        specs = read_specs(specs_path)
        for acronym, bundle in bundles.items():
            if acronym in specs and specs[acronym] != bundle.model.spec:
                raise ConfigError(f"{acronym}: saved model does not match its entry in {specs_path}")
        order = [a for a in specs if a in bundles] + [a for a in bundles if a not in specs]

    config = build_config(args.config, _overrides(args))
    if not config.data:
        raise ConfigError("predict needs --data")
    data = load_csv(config.data, config.label_column, config.exclude_columns)

    columns: Dict[str, Any] = {}
    rows: List[ReportRow] = []
    for acronym in order:
        bundle = bundles[acronym]
        predicted = bundle.model.predict(bundle.prepare(data))
        columns[acronym] = predicted
        metrics = evaluate_predictions(predicted, data.labels)
        rows.append(ReportRow(label=acronym, kind="model", composition=acronym, metrics=metrics))

    print(render_table(rows, f"Saved models on {Path(config.data).name}"))
    frame = pd.DataFrame(columns)
    frame["actual"] = data.labels
    print(write_frame(Path(config.out) / "predictions.csv", frame))
    return EXIT_OK


_COMMANDS = {
    "flat": _run_sweep,
    "mixed": _run_sweep,
    "select-features": _run_select_features,
    "enumerate": _run_enumerate,
    "metrics": _run_metrics,
    "synthetic": _run_synthetic,
    "predict": _run_predict,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FraudMixError, ValueError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURES
