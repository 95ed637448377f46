"""Trace and report serialization.

Traces are plain CSV (UTF-8, header row, '.' decimal separator) with one
row per logged iteration; reports are JSON.  Floats are written with
``repr`` so identical runs produce byte-identical files, which the test
suite checks by hashing.
"""

import csv
import hashlib
import json
import os

from .errors import InvalidInputError

__all__ = [
    "write_trace",
    "read_trace",
    "trace_digest",
    "write_json",
    "read_json",
]


def _format(value):
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace(path, rows, fieldnames=None):
    """Write trace rows (list of dicts) as CSV; field order follows the
    first row unless ``fieldnames`` is given."""
    if not rows:
        raise InvalidInputError("refusing to write an empty trace")
    if fieldnames is None:
        fieldnames = list(rows[0].keys())
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_format(row.get(name, "")) for name in fieldnames])


def read_trace(path):
    """Read a trace CSV back into a list of dicts, parsing numbers."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for record in csv.DictReader(fh):
            parsed = {}
            for key, raw in record.items():
                try:
                    parsed[key] = float(raw)
                except (TypeError, ValueError):
                    parsed[key] = raw
            rows.append(parsed)
    return rows


def trace_digest(rows):
    """Stable content hash of trace rows (independent of file paths)."""
    blob = "\n".join(
        ",".join(f"{k}={_format(v)}" for k, v in sorted(row.items()))
        for row in rows)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
