"""Metrics tables as CSV files with a fixed header per table kind."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

SCHEMAS = {
    "intervals": (
        "iter", "t1", "p", "rho", "refreshed", "active_n",
        "loss_vr", "acc_vr", "grad_queries_cum", "wall_ms_cum",
    ),
    "updates": (
        "update", "iter", "t1", "p", "union_size", "h_norm",
        "anchor_loss", "active_n", "normalized_bias",
    ),
    "diagnostics": ("iter", "estimator", "bias", "variance", "normalized_bias"),
    "final": (
        "method", "seed", "final_loss", "final_acc",
        "updates_total", "grad_queries_total", "wall_ms_total",
    ),
}
TABLES = tuple(SCHEMAS)
WALL_COLUMNS = {"wall_ms_cum", "wall_ms_total"}


class SchemaError(ValueError):
    pass


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    if hasattr(value, "item"):  # numpy scalar
        return _cell(value.item())
    return str(value)


def render_table(kind: str, rows) -> str:
    cols = SCHEMAS[kind]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in cols])
    return buf.getvalue()


def write_table(path, kind: str, rows) -> None:
    Path(path).write_text(render_table(kind, rows), encoding="utf-8", newline="")


def metrics_tables(metrics) -> dict:
    """The four table row lists of a finished run."""
    return {
        "intervals": metrics.intervals,
        "updates": metrics.updates,
        "diagnostics": metrics.diagnostics,
        "final": [metrics.final],
    }


def write_run(out_dir, metrics) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for kind, rows in metrics_tables(metrics).items():
        p = out / f"{kind}.csv"
        write_table(p, kind, rows)
        paths.append(p)
    return paths


def _value(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path, kind: str) -> list[dict]:
    """Parse a table and check its header against the schema for ``kind``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read ({exc.strerror})") from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != SCHEMAS[kind]:
        raise SchemaError(f"{path}: header {header} does not match the {kind} schema")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(header):
            raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
        rows.append({c: _value(v) for c, v in zip(header, rec)})
    return rows


def read_run(run_dir) -> dict:
    run_dir = Path(run_dir)
    return {kind: read_table(run_dir / f"{kind}.csv", kind) for kind in TABLES}


def strip_wall(text: str) -> str:
    """Table text with wall-clock columns blanked, for timing-insensitive comparison."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return text
    drop = [i for i, c in enumerate(rows[0]) if c in WALL_COLUMNS]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([v for i, v in enumerate(r) if i not in drop])
    return buf.getvalue()
