"""Tabular report output: metrics, rankings, choice curves and accounting.

No plotting; curve tables carry decision index vs safe-choice share per
(model, context), which is enough to redraw choice-curve figures.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .metrics import ModelMetrics, aggregates_for_run
from .store import FollowupRecord, TrialRecord, compute_totals

log = logging.getLogger(__name__)


class Format(str, Enum):
    CSV = "csv"
    JSON = "json"
    MD = "md"


METRIC_COLUMNS = (
    "model",
    "mora",
    "dhra",
    "gender_distance",
    "manipulation_sum",
    "inverted_manipulation",
    "gender_signed_sum",
    "low_confidence_contexts",
    "distance",
    "benchmark_source",
)
ACCOUNTING_COLUMNS = (
    "model",
    "input_tokens",
    "output_tokens",
    "unwanted_answers",
    "api_requests",
    "records",
    "valid",
    "reasks",
    "tokens_estimated_records",
    "followup_requests",
)
CURVE_COLUMNS = ("model", "context_id", "decision", "safe_share", "n_valid", "n_unwanted")
RANKING_COLUMNS = ("metric", "rank", "model", "value")


@dataclass
class ReportBundle:
    metrics: list[ModelMetrics]
    rankings: dict[str, list[dict]]
    curves: list[dict]
    accounting: list[dict]


def _rank(metrics: Sequence[ModelMetrics], attr: str, descending: bool) -> list[dict]:
    have = [m for m in metrics if getattr(m, attr) is not None]
    missing = sorted(m.model for m in metrics if getattr(m, attr) is None)
    sign = -1 if descending else 1
    ordered = sorted(have, key=lambda m: (sign * getattr(m, attr), m.model))
    rows = [{"rank": i + 1, "model": m.model, "value": getattr(m, attr)} for i, m in enumerate(ordered)]
    rows += [{"rank": None, "model": name, "value": None} for name in missing]
    return rows


def build_report(
    metrics: Sequence[ModelMetrics],
    records: Iterable[TrialRecord],
    followups: Iterable[FollowupRecord] = (),
) -> ReportBundle:
    records = list(records)
    metrics = sorted(metrics, key=lambda m: m.model)
    curves = []
    for agg in aggregates_for_run(records):
        for d, share in enumerate(agg.values, 1):
            curves.append(
                {
                    "model": agg.model,
                    "context_id": agg.context_id,
                    "decision": d,
                    "safe_share": share,
                    "n_valid": agg.n_valid,
                    "n_unwanted": agg.n_unwanted,
                }
            )
    totals = compute_totals(records, followups, [m.model for m in metrics])
    accounting = []
    for model, t in totals.items():
        row = {k: t[k] for k in ACCOUNTING_COLUMNS if k in t}
        row["model"] = model
        row["unwanted_answers"] = t["unwanted"]
        accounting.append({k: row[k] for k in ACCOUNTING_COLUMNS})
    return ReportBundle(
        metrics=list(metrics),
        rankings={
            # higher manipulability is better; smaller distance to humans is better
            "mora": _rank(metrics, "mora", descending=True),
            "dhra": _rank(metrics, "dhra", descending=False),
        },
        curves=curves,
        accounting=accounting,
    )


def _metric_row(m: ModelMetrics) -> dict:
    return {
        "model": m.model,
        "mora": m.mora,
        "dhra": m.dhra,
        "gender_distance": m.gender_distance,
        "manipulation_sum": None if m.signed_manipulation is None else sum(m.signed_manipulation),
        "inverted_manipulation": m.inverted_manipulation,
        "gender_signed_sum": None if m.gender_signed is None else sum(m.gender_signed),
        "low_confidence_contexts": ";".join(m.low_confidence_contexts),
        "distance": m.distance,
        "benchmark_source": m.benchmark_source,
    }


def _csv(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: "" if row.get(k) is None else (repr(row[k]) if isinstance(row[k], float) else row[k]) for k in columns})
    return buf.getvalue()


def _fmt(v, digits: int = 4) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        s = f"{v:.{digits}f}"
        return s.lstrip("-") if float(s) == 0 else s
    return str(v)


def _md_table(columns: Sequence[str], rows: Iterable[dict]) -> str:
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for row in rows:
        lines.append("| " + " | ".join(_fmt(row.get(c)) for c in columns) + " |")
    return "\n".join(lines)


def render(bundle: ReportBundle, fmt: Format) -> dict[str, str]:
    """File name -> content for one output format."""
    fmt = Format(fmt)
    ranking_rows = [{"metric": k, **row} for k in ("mora", "dhra") for row in bundle.rankings[k]]
    if fmt is Format.CSV:
        return {
            "metrics.csv": _csv(METRIC_COLUMNS, (_metric_row(m) for m in bundle.metrics)),
            "rankings.csv": _csv(RANKING_COLUMNS, ranking_rows),
            "curves.csv": _csv(CURVE_COLUMNS, bundle.curves),
            "accounting.csv": _csv(ACCOUNTING_COLUMNS, bundle.accounting),
        }
    if fmt is Format.JSON:
        doc = {
            "metrics": [m.to_dict() for m in bundle.metrics],
            "rankings": bundle.rankings,
            "curves": bundle.curves,
            "accounting": bundle.accounting,
        }
        return {"report.json": json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n"}

    parts = ["# Risk-attitude report", "", "## Metrics", "", _md_table(METRIC_COLUMNS, [_metric_row(m) for m in bundle.metrics])]
    parts += ["", "## Rankings", "", _md_table(RANKING_COLUMNS, ranking_rows)]
    parts += ["", "## Accounting", "", _md_table(ACCOUNTING_COLUMNS, bundle.accounting)]
    parts += ["", "## Mean switch point by context", ""]
    ms_rows = [
        {"model": m.model, "context_id": c, "mean_switch": v}
        for m in bundle.metrics
        for c, v in m.mean_switch_by_context.items()
    ]
    parts.append(_md_table(("model", "context_id", "mean_switch"), ms_rows))
    flagged = [m for m in bundle.metrics if m.inverted_manipulation]
    if flagged:
        parts += ["", "## Inverted manipulation", ""]
        parts += [f"- {m.model}: risk-avoiding prompt is less safe than risk-loving on at least one decision" for m in flagged]
    notes = [(m.model, n) for m in bundle.metrics for n in m.notes]
    if notes:
        parts += ["", "## Notes", ""] + [f"- {model}: {n}" for model, n in notes]
    return {"report.md": "\n".join(parts) + "\n"}


def emit(
    metrics: Sequence[ModelMetrics],
    records: Iterable[TrialRecord],
    fmt: Format | str,
    out_dir: str | Path,
    followups: Iterable[FollowupRecord] = (),
) -> list[Path]:
    """Write the report files; on a write failure, remove what this call wrote and re-raise."""
    out_dir = Path(out_dir)
    files = render(build_report(metrics, records, followups), Format(fmt))
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for name in sorted(files):
            path = out_dir / name
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                written.append(path)
                fh.write(files[name])
    except OSError:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return written


def load_json_report(path: str | Path) -> list[ModelMetrics]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return [ModelMetrics.from_dict(d) for d in doc["metrics"]]
