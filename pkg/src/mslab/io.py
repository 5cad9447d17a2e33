"""CSV and flat-text persistence with reproducible number formatting.

Floating-point values are written with 17 significant digits so that reading
a file back reproduces the exact doubles and repeated runs produce
byte-identical outputs.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """Render a value for delimited output; floats get 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_points(path, points: np.ndarray, labels=None):
    """Write one row per point: d coordinate columns, optional label column."""
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    header = [f"x{c}" for c in range(d)]
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape[0] != points.shape[0]:
            raise ValueError("labels length does not match point count")
        header.append("label")
    lines = [",".join(header)]
    for i, row in enumerate(points):
        cells = [fmt(v) for v in row]
        if labels is not None:
            cells.append(str(int(labels[i])))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class PointsFormatError(ValueError):
    """Malformed points CSV; carries the offending 1-based row number."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


def read_points(path):
    """Read a points CSV; returns (points, labels or None).

    A header row is optional.  The label column is recognized only through a
    header naming its last column "label"; header coordinate columns may have
    any names.  Headerless files are treated as pure coordinates.
    """
    text = Path(path).read_text(encoding="utf-8")
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows:
        raise PointsFormatError(1, "file is empty")
    first = rows[0].split(",")
    has_header = False
    try:
        float(first[0])
    except ValueError:
        has_header = True
    labeled = has_header and first[-1].strip().lower() == "label"
    data_rows = rows[1:] if has_header else rows
    if not data_rows:
        raise PointsFormatError(2, "no data rows")
    width = len(data_rows[0].split(","))
    points, labels = [], []
    for lineno, row in enumerate(data_rows, start=2 if has_header else 1):
        cells = row.split(",")
        if len(cells) != width:
            raise PointsFormatError(
                lineno, f"expected {width} columns, found {len(cells)}"
            )
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise PointsFormatError(lineno, str(exc)) from None
        if labeled:
            label = cells[-1].strip()
            try:
                labels.append(int(label))
            except ValueError:
                raise PointsFormatError(
                    lineno, f"label column must be integer, got {label!r}"
                ) from None
            values = values[:-1]
        points.append(values)
    pts = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(pts)):
        bad = int(np.nonzero(~np.isfinite(pts).all(axis=1))[0][0])
        raise PointsFormatError(
            bad + (2 if has_header else 1), "non-finite coordinate"
        )
    return pts, (np.asarray(labels, dtype=np.int64) if labeled else None)


def write_assignments(path, labels: np.ndarray):
    """Write the cluster assignment CSV: point index, cluster id."""
    lines = ["point,cluster"]
    lines.extend(f"{i},{int(lab)}" for i, lab in enumerate(np.asarray(labels)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_assignments(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if rows and rows[0].lower().startswith("point"):
        rows = rows[1:]
    labels = {}
    for row in rows:
        idx, lab = row.split(",")
        labels[int(idx)] = int(lab)
    return np.asarray([labels[i] for i in range(len(labels))], dtype=np.int64)


def write_record(path, record: dict):
    """Write a flat key = value record, one pair per line."""
    lines = [f"{key} = {fmt(value)}" for key, value in record.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_config(path) -> dict:
    """Read a flat key = value config file; '#' starts a comment line."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def write_csv(path, header: list, rows: list):
    """Write rows of mixed scalars with reproducible float formatting."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_trace_json(path, trace_dict: dict):
    Path(path).write_text(
        json.dumps(trace_dict, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
