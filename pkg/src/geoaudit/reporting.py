"""Diffable JSON/CSV emission: sorted keys and 6 significant digits."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np


def fmt_float(x: float) -> str:
    return format(x, ".6g")


def _normalize(obj: Any) -> Any:
    if hasattr(obj, "to_dict"):
        return _normalize(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _normalize(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_normalize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(fmt_float(x)) if math.isfinite(x) else None
    return obj


def _rows(obj: Any) -> list[dict]:
    if hasattr(obj, "rows"):
        return list(obj.rows())
    if hasattr(obj, "row"):
        return [obj.row()]
    if isinstance(obj, dict):
        return [obj]
    rows: list[dict] = []
    for item in obj:
        rows.extend(_rows(item))
    return rows


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return fmt_float(float(v))
    return str(v)


def to_json(report: Any) -> str:
    return json.dumps(_normalize(report), sort_keys=True, indent=2) + "\n"


def to_csv(report: Any) -> str:
    rows = _rows(report)
    if not rows:
        raise ValueError("nothing to write: report has no rows")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row[k]) for k in header])
    return buf.getvalue()


def write_report(report: Any, path: str | Path, format: str = "json") -> Path:
    """Write ``report`` as JSON or CSV.

    CSV accepts objects exposing ``rows()``/``row()``, a dict, or an iterable
    of those; the column order follows the first row.
    """
    path = Path(path)
    if format == "json":
        text = to_json(report)
    elif format == "csv":
        text = to_csv(report)
    else:
        raise ValueError(f"unsupported report format {format!r} (use 'json' or 'csv')")
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path
