"""Rendering and reloading of evaluation reports.

``report.json`` carries every round row and aggregate but no wall-clock
figures, so identical runs produce identical bytes. Timings live in
``timing.json`` and are shown in the text table when available.
"""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources

import numpy as np

from . import plotting
from .walk_forward import DAY_LABELS, EvalReport, RoundResult

SCHEMA_ID = "stockcast.report/1"
FORMATS = ("text", "csv", "json", "svg")
COLUMNS = ("RMSE",) + DAY_LABELS
FILENAMES = {
    "text": "report.txt",
    "csv": "report.csv",
    "json": "report.json",
    "svg": "per_day_rmse.svg",
}


def _num(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)


def json_safe(obj):
    """Recursively replace non-finite floats with None so the JSON is strict."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _row(values) -> dict:
    return {c: _num(v) for c, v in zip(COLUMNS, values)}


def to_dict(report: EvalReport) -> dict:
    agg = report.aggregates()
    return {
        "schema": SCHEMA_ID,
        "kind": report.kind,
        "metadata": json_safe(report.metadata),
        "partial": report.partial,
        "mean_open": report.mean_open,
        "rounds": [
            {
                "round": r.round,
                "seed": r.seed,
                "error": r.error,
                **(
                    {"rmse": r.rmse, "per_day": dict(zip(DAY_LABELS, r.per_day)), "predictions": r.predictions}
                    if r.ok
                    else {"rmse": None, "per_day": None, "predictions": None}
                ),
            }
            for r in report.rounds
        ],
        "aggregates": {name: _row(values[: len(COLUMNS)]) for name, values in agg.items()},
        "ratio_to_mean": _row(report.ratios()),
        "week_starts": report.week_starts,
        "actuals": report.actuals,
    }


def timing_dict(report: EvalReport) -> dict:
    agg = report.aggregates()
    return {
        "rounds": [{"round": r.round, "seconds": r.seconds} for r in report.ok_rounds],
        "aggregates": {name: _num(values[-1]) for name, values in agg.items()},
        "total_seconds": float(sum(r.seconds for r in report.ok_rounds)),
    }


def from_dict(doc: dict, timing: dict | None = None) -> EvalReport:
    if doc.get("schema") != SCHEMA_ID:
        raise ValueError(f"not a {SCHEMA_ID} document")
    seconds = {t["round"]: t["seconds"] for t in (timing or {}).get("rounds", [])}
    rounds = []
    for r in doc["rounds"]:
        if r["error"] is None:
            per_day = [r["per_day"][d] for d in DAY_LABELS]
            rounds.append(
                RoundResult(r["round"], r["seed"], r["rmse"], per_day, seconds.get(r["round"], float("nan")), r["predictions"])
            )
        else:
            rounds.append(RoundResult(r["round"], r["seed"], error=r["error"]))
    return EvalReport(doc["kind"], rounds, doc["mean_open"], doc["metadata"], doc["actuals"], doc["week_starts"])


def schema() -> dict:
    return json.loads(resources.files("stockcast").joinpath("report.schema.json").read_text())


def _fmt(v, digits):
    return "-" if v is None or not np.isfinite(v) else f"{v:.{digits}f}"


def render_text(report: EvalReport) -> str:
    meta = report.metadata
    lines = [
        f"Model {report.kind.upper()}  rounds={meta.get('n_rounds', len(report.rounds))}  "
        f"base_seed={meta.get('base_seed', '-')}  retrain={meta.get('retrain_policy', '-')}  "
        f"scaler={meta.get('scaler', '-')}",
    ]
    if report.partial:
        lines.append(f"PARTIAL: {len(report.rounds) - len(report.ok_rounds)} round(s) failed")
    header = f"{'No.':<10}{'RMSE':>9}" + "".join(f"{d:>9}" for d in DAY_LABELS) + f"{'Time':>9}"
    lines += [header, "-" * len(header)]
    for r in report.rounds:
        if r.ok:
            cells = f"{r.rmse:>9.2f}" + "".join(f"{v:>9.1f}" for v in r.per_day) + f"{_fmt(r.seconds, 2):>9}"
        else:
            cells = f"  failed: {r.error}"
        lines.append(f"{r.round:<10}{cells}")
    lines.append("-" * len(header))
    for name, values in report.aggregates().items():
        lines.append(
            f"{name:<10}{_fmt(values[0], 2):>9}"
            + "".join(f"{_fmt(v, 1):>9}" for v in values[1:-1])
            + f"{_fmt(values[-1], 2):>9}"
        )
    ratios = report.ratios()
    lines.append(f"{'RMSE/Mean':<10}{_fmt(ratios[0], 4):>9}" + "".join(f"{_fmt(v, 2):>9}" for v in ratios[1:]))
    lines.append(f"mean test open: {report.mean_open:.2f}")
    return "\n".join(lines) + "\n"


def render_csv(report: EvalReport) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["row", "seed", *COLUMNS, "error"])
    for r in report.rounds:
        values = [repr(float(r.rmse)), *(repr(float(v)) for v in r.per_day)] if r.ok else [""] * len(COLUMNS)
        w.writerow([r.round, r.seed, *values, r.error or ""])
    for name, values in report.aggregates().items():
        w.writerow([name, "", *(repr(float(v)) for v in values[: len(COLUMNS)]), ""])
    w.writerow(["RMSE/Mean", "", *(repr(float(v)) for v in report.ratios()), ""])
    return out.getvalue()


def render_svg(report: EvalReport) -> bytes:
    agg = report.aggregates()
    rows = [r.per_day for r in report.ok_rounds]
    return plotting.per_day_figure(
        DAY_LABELS,
        agg["Mean"][1:6],
        agg["Min"][1:6],
        agg["Max"][1:6],
        title=f"{report.kind.upper()}: RMSE by day of week ({len(rows)} rounds)",
        rounds=rows,
    )


def render_forecast_svg(report: EvalReport, round_index: int = 0) -> bytes:
    r = report.ok_rounds[round_index]
    return plotting.forecast_figure(
        report.week_starts,
        report.actuals,
        r.predictions,
        title=f"{report.kind.upper()} round {r.round}: walk-forward forecasts",
    )


def render_report(report: EvalReport, format: str) -> bytes:
    if format == "text":
        return render_text(report).encode()
    if format == "csv":
        return render_csv(report).encode()
    if format == "json":
        return (json.dumps(to_dict(report), indent=2, allow_nan=False) + "\n").encode()
    if format == "svg":
        return render_svg(report)
    raise ValueError(f"unknown report format {format!r} (expected one of {', '.join(FORMATS)})")
