"""CSV ingestion and deterministic CSV/JSON writers."""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .core import Dataset
from .errors import EmptyFile, InputError, NonFiniteValue, ParseError
from .glm import GlmDataset

FLOAT_FMT = ".17g"


def fmt_float(v) -> str:
    return format(float(v), FLOAT_FMT)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def load_csv(path, response: str | None = None) -> Dataset:
    """Read a headed, comma-separated numeric table.

    The response is the column named ``response``, else a column named
    ``y``, else the last column. A response with values in {0, 1} and both
    classes present yields a :class:`GlmDataset`.

    Raises
    ------
    InputError
        Missing file or unknown response column.
    EmptyFile
        No header or no data rows.
    ParseError, NonFiniteValue
        A cell is not a finite number; the error carries the 1-based data
        row and the column name.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise InputError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyFile(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise EmptyFile(f"{path} has a header but no data rows")
    if len(set(header)) != len(header):
        raise InputError(f"{path}: duplicate column names")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}", row=i)
        for j, cell in enumerate(row):
            text = cell.strip()
            try:
                v = float(text)
            except ValueError:
                raise ParseError(f"{path}: row {i}, column {header[j]!r}: cannot parse {text!r}",
                                 row=i, column=header[j]) from None
            if not math.isfinite(v):
                raise NonFiniteValue(f"{path}: row {i}, column {header[j]!r}: non-finite value {text!r}",
                                     row=i, column=header[j])
            values[i - 1, j] = v
    if response is None:
        response = "y" if "y" in header else header[-1]
    if response not in header:
        raise InputError(f"{path}: response column {response!r} not in header")
    if len(header) < 2:
        raise InputError(f"{path}: need at least one predictor column besides the response")
    r = header.index(response)
    keep = [j for j in range(len(header)) if j != r]
    X = values[:, keep]
    y = values[:, r]
    names = tuple(header[j] for j in keep)
    if np.all((y == 0) | (y == 1)) and y.min() != y.max():
        return GlmDataset(X, y, None, names)
    return Dataset(X, y, None, names)


def save_csv(path, data: Dataset, response: str = "y"):
    """Write ``data`` so that :func:`load_csv` reads it back bit-exactly."""
    names = data.names or tuple(f"x{j + 1}" for j in range(data.p))
    rows = [list(r) + [v] for r, v in zip(data.X, data.y)]
    write_table(path, list(names) + [response], rows)


def write_table(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, frozenset, set)):
        items = sorted(obj) if isinstance(obj, (frozenset, set)) else obj
        return [_jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise InputError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})", row=exc.lineno) from None
