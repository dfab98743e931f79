"""Deterministic numeric formatting for CSV and JSON artifacts."""
import csv
import json
import math

import numpy as np


def fmt(value):
    """10 significant digits; empty string for absent values."""
    if value is None:
        return ""
    if isinstance(value, (str, bytes)):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    if v == 0.0:
        return "0"
    return f"{v:.10g}"


def jnum(value):
    """JSON mirror of :func:`fmt`: same rounding, ``None`` when absent."""
    if value is None:
        return None
    if isinstance(value, (str, bool)):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, (bool, np.bool_)):
        return int(value)
    v = float(value)
    if math.isnan(v) or math.isinf(v):
        return None
    return float(f"{v:.10g}") + 0.0


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def records(columns, rows):
    return [{c: jnum(v) for c, v in zip(columns, row)} for row in rows]
