"""Deterministic CSV and JSON persistence for experiment results."""

import csv
import io
import json
import math

SCHEMA_VERSION = 1


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(float(v))
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def rows_to_csv(rows) -> str:
    """CSV text: a ``schema=1`` line, a header, then one line per row (columns in first-seen order)."""
    columns = []
    for row in rows:
        for k in row:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    buf.write(f"schema={SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def read_csv(text):
    """Inverse of ``rows_to_csv`` (values stay strings); checks the schema line."""
    lines = text.splitlines()
    if not lines or lines[0] != f"schema={SCHEMA_VERSION}":
        raise ValueError("missing or unsupported schema line")
    return list(csv.DictReader(lines[1:]))


def _jsonable(obj):
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return repr(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return obj.item()
    return obj


def to_json(obj) -> str:
    return json.dumps({"schema": SCHEMA_VERSION, "result": _jsonable(obj)}, sort_keys=True, indent=2) + "\n"


def write_text(path, text):
    if path is None or path == "-":
        print(text, end="")
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
