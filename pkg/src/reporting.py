"""
Report rendering: CSV and aligned plain-text tables, the summary table, the
ensemble composition table, per-k cluster summaries and the run manifest.

Everything written here is a pure function of its inputs: no timestamps, no host
names, fixed float formatting. Two runs with one config and seed produce
byte-identical files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.state import EnsembleSpec, EvaluationReport, FailureRecord, KMeansModel, MetricsRow, ReportRow

logger = logging.getLogger(__name__)

UNDEFINED = "undefined"
_METRIC_COLUMNS = ("acc", "bcr", "sens", "spec", "f1", "mean4")


def _fmt(value: Optional[float], digits: int) -> str:
    return UNDEFINED if value is None else f"{value:.{digits}f}"


def _metric_cells(row: MetricsRow, digits: int) -> Dict[str, str]:
    return {name: _fmt(getattr(row, name), digits) for name in _METRIC_COLUMNS}


# ---------------------------------------------------------------------------
# Report tables
# ---------------------------------------------------------------------------


def report_frame(report: EvaluationReport) -> pd.DataFrame:
    records = []
    for rank, row in enumerate(report.rows, start=1):
        c = row.metrics.counts
        records.append({
            "rank": rank,
            "label": row.label,
            "kind": row.kind,
            "rule": row.rule or "",
            "composition": row.composition,
            **_metric_cells(row.metrics, 6),
            "mean4_partial": row.metrics.mean4_partial,
            "good_performing": row.good_performing,
            "tp": c.tp,
            "tn": c.tn,
            "fp": c.fp,
            "fn": c.fn,
        })
    return pd.DataFrame.from_records(records, columns=[
        "rank", "label", "kind", "rule", "composition", *_METRIC_COLUMNS,
        "mean4_partial", "good_performing", "tp", "tn", "fp", "fn",
    ])


def folds_frame(report: EvaluationReport) -> pd.DataFrame:
    records = []
    for row in report.rows:
        for fold, fm in row.folds.items():
            records.append({"label": row.label, "fold": fold, **_metric_cells(fm, 6),
                            "tp": fm.counts.tp, "tn": fm.counts.tn, "fp": fm.counts.fp, "fn": fm.counts.fn})
    return pd.DataFrame.from_records(records, columns=["label", "fold", *_METRIC_COLUMNS, "tp", "tn", "fp", "fn"])


def _table_rows(rows: Iterable[ReportRow]) -> pd.DataFrame:
    records = []
    for row in rows:
        m = row.metrics
        mean = _fmt(m.mean4, 3) + ("*" if m.mean4_partial and m.mean4 is not None else "")
        records.append({
            "Model/Ensemble": row.label,
            "acc": _fmt(m.acc, 3),
            "bcr": _fmt(m.bcr, 3),
            "sens": _fmt(m.sens, 3),
            "spec": _fmt(m.spec, 3),
            "Mean": mean,
            "good": "yes" if row.good_performing else "",
        })
    return pd.DataFrame.from_records(
        records, columns=["Model/Ensemble", "acc", "bcr", "sens", "spec", "Mean", "good"]
    )


def render_table(rows: Sequence[ReportRow], title: str) -> str:
    lines = [title, "=" * len(title), ""]
    if rows:
        lines.append(_table_rows(rows).to_string(index=False, justify="left"))
    else:
        lines.append("(no rows)")
    lines += ["", "Mean = mean of acc, bcr, sens, spec; * = computed over the defined metrics only.", ""]
    return "\n".join(lines)


def summary_rows(report: EvaluationReport, top_ensembles: int) -> List[ReportRow]:
    """Every individual model plus the best `top_ensembles` ensembles of each rule, in report order."""
    taken: Dict[str, int] = {}
    selected = []
    for row in report.rows:
        if row.kind == "model":
            selected.append(row)
        elif taken.get(row.rule, 0) < top_ensembles:
            taken[row.rule] = taken.get(row.rule, 0) + 1
            selected.append(row)
    return selected


def render_summary(report: EvaluationReport, top_ensembles: int) -> str:
    rows = summary_rows(report, top_ensembles)
    text = render_table(rows, f"{report.title} (summary)")
    ensembles = [r for r in rows if r.kind == "ensemble"]
    if ensembles:
        composition = pd.DataFrame(
            [{"Ensemble": r.label, "Members": r.composition} for r in ensembles]
        ).to_string(index=False, justify="left")
        text += "\nEnsemble composition\n--------------------\n\n" + composition + "\n"
    return text


# ---------------------------------------------------------------------------
# Composition, clustering and feature tables
# ---------------------------------------------------------------------------


def composition_frame(specs: Sequence[EnsembleSpec]) -> pd.DataFrame:
    return pd.DataFrame.from_records(
        [{"index": s.index, "rule": s.rule, "label": s.label, "members": s.composition} for s in specs],
        columns=["index", "rule", "label", "members"],
    )


def render_centroids(model: KMeansModel, feature_names: Sequence[str]) -> str:
    frame = pd.DataFrame(model.centroids, columns=list(feature_names))
    frame.insert(0, "cluster", np.arange(model.k))
    header = (
        f"k={model.k} inertia={model.inertia:.6f} iterations={model.iterations_run} "
        f"reseeded_last={model.reseeded_last}"
    )
    return header + "\n\n" + frame.to_string(index=False, float_format=lambda v: f"{v:.6f}") + "\n"


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def write_text(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", path)
    return str(path)


def write_frame(path: Path, frame: pd.DataFrame) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return str(path)


def write_report(report: EvaluationReport, out_dir: str | Path, suffix: str, top_ensembles: int) -> List[str]:
    """report_<suffix>.csv / .txt, summary_<suffix>.txt and, with several folds, report_folds_<suffix>.csv."""
    out = Path(out_dir)
    written = [
        write_frame(out / f"report_{suffix}.csv", report_frame(report)),
        write_text(out / f"report_{suffix}.txt", render_table(report.rows, report.title)),
        write_text(out / f"summary_{suffix}.txt", render_summary(report, top_ensembles)),
    ]
    folds = folds_frame(report)
    if folds["fold"].nunique() > 1:
        written.append(write_frame(out / f"report_folds_{suffix}.csv", folds))
    return written


def _relative(path: str, out: Path) -> str:
    path = Path(path)
    return path.relative_to(out).as_posix() if path.is_relative_to(out) else path.name


def write_manifest(
    out_dir: str | Path,
    *,
    command: str,
    config: Dict[str, Any],
    config_hash: str,
    seed: Optional[int],
    grids_version: str,
    files: Sequence[str],
    failures: Sequence[FailureRecord],
    counts: Optional[Dict[str, Any]] = None,
) -> str:
    out = Path(out_dir)
    manifest = {
        "command": command,
        "seed": seed,
        "config_hash": config_hash,
        "config": config,
        "grids_version": grids_version,
        "counts": counts or {},
        "files": sorted(_relative(f, out) for f in files),
        "failures": [f.model_dump() for f in failures],
    }
    return write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
