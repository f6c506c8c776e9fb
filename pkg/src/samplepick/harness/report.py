"""CSV and JSON report writers.

CSV layout: ``# key=value`` lines echoing the run parameters, then a
header row with :data:`COLUMNS`, one row per interval and a final row
whose ``interval`` is ``mean``. JSON holds the same values as
``{"header": {...}, "intervals": [...], "summary": {...}}``.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .metrics import COLUMNS, MetricsReport


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    for key, value in report.header.items():
        buf.write(f"# {key}={_cell(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in report.rows():
        writer.writerow([_cell(row[c]) for c in COLUMNS])
    return buf.getvalue()


def report_json(report: MetricsReport) -> str:
    rows = report.rows()
    doc = {"header": report.header, "intervals": rows[:-1], "summary": rows[-1]}
    return json.dumps(doc, indent=2) + "\n"


def emit_report(report: MetricsReport, path, fmt: str | None = None) -> Path:
    """Write ``report`` to ``path``; the format defaults to the file suffix."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "json":
        text = report_json(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path.write_text(text)
    return path


def read_csv_report(text: str) -> tuple[dict, list[dict]]:
    """Parse a CSV report back into (header, rows) with numeric values."""
    header: dict = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            header[key] = _parse(value)
        else:
            body.append(line)
    rows = []
    for rec in csv.DictReader(body):
        rows.append({k: _parse(v) for k, v in rec.items()})
    return header, rows


def _parse(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text
