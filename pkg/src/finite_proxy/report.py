"""Report emission: JSON document, CSV tables, two-column plot data."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import FiniteProxyError
from .pipeline import RunReport

FORMATS = ("json", "csv", "plotdata")


def emit_report(report: RunReport, out_dir, formats=FORMATS) -> list[Path]:
    """Write the report to disk; returns the created paths.

    json: the full report as report.json (keys sorted, so repeated runs
    with the same config and seed are byte-identical apart from the
    timestamp field).
    csv: one file per numeric table, headers
    mode_index,value,reference,abs_err,rel_err.
    plotdata: plain two-column "x y" text per plot series.
    """
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise FiniteProxyError(f"unknown report formats: {sorted(unknown)}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FiniteProxyError(f"cannot create output directory {out}: {exc}") from exc

    written: list[Path] = []
    try:
        if "json" in formats:
            path = out / "report.json"
            path.write_text(render_json(report))
            written.append(path)
        if "csv" in formats:
            for stage in report.stages.values():
                for table in stage.tables:
                    path = out / f"{stage.name}__{table.name}.csv"
                    with path.open("w", newline="") as fh:
                        writer = csv.writer(fh)
                        writer.writerow(table.columns)
                        writer.writerows(table.rows)
                    written.append(path)
        if "plotdata" in formats:
            for stage in report.stages.values():
                for series in stage.plots:
                    path = out / f"{stage.name}__{series.name}.dat"
                    lines = [f"{x:.17g} {y:.17g}" for x, y in zip(series.x, series.y)]
                    path.write_text("\n".join(lines) + "\n")
                    written.append(path)
    except OSError as exc:
        raise FiniteProxyError(f"failed while writing report files: {exc}") from exc
    return written


def render_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
