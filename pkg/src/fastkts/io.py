"""Matrix files and report writing.

Two on-disk layouts are supported:

* CSV: one observation per line, fields separated by ``delimiter``, optional
  single header line. Blank lines are skipped.
* raw f64: ``rows * cols`` IEEE-754 binary64 values, little-endian, row-major,
  no header. The file size must be exactly ``rows * cols * 8`` bytes.
"""

from __future__ import annotations

import csv
import json
import os
from importlib import resources
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidData, ParseError


@dataclass(frozen=True)
class MatrixFile:
    path: str | os.PathLike
    format: str = "csv"  # "csv" | "raw"
    delimiter: str = ","
    has_header: bool = False
    rows: int | None = None
    cols: int | None = None


def _check_finite(arr: np.ndarray, path, line_of_row=None) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        where = f"line {line_of_row[r]}" if line_of_row is not None else f"row {r}"
        raise InvalidData(f"{path}: non-finite value at {where}, column {c + 1}")


def _load_csv(spec: MatrixFile) -> np.ndarray:
    rows = []
    lines = []
    width = None
    with open(spec.path, newline="") as fh:
        reader = csv.reader(fh, delimiter=spec.delimiter)
        for lineno, record in enumerate(reader, start=1):
            if spec.has_header and lineno == 1:
                continue
            if not record or all(not f.strip() for f in record):
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise ParseError(f"{spec.path}: line {lineno} has {len(record)} fields, expected {width}", line=lineno)
            try:
                rows.append([float(f) for f in record])
            except ValueError:
                raise ParseError(f"{spec.path}: line {lineno} has a non-numeric field", line=lineno) from None
            lines.append(lineno)
    if not rows:
        raise FormatError(f"{spec.path}: no data rows")
    arr = np.array(rows, dtype=np.float64)
    _check_finite(arr, spec.path, lines)
    return arr


def _load_raw(spec: MatrixFile) -> np.ndarray:
    if spec.rows is None or spec.cols is None:
        raise FormatError("raw f64 input needs declared rows and cols")
    if spec.rows < 1 or spec.cols < 1:
        raise FormatError(f"declared shape {spec.rows}x{spec.cols} is empty")
    expected = spec.rows * spec.cols * 8
    actual = os.path.getsize(spec.path)
    if actual != expected:
        raise FormatError(
            f"{spec.path}: {actual} bytes but {spec.rows}x{spec.cols} float64 needs {expected}"
        )
    arr = np.fromfile(spec.path, dtype="<f8").reshape(spec.rows, spec.cols).astype(np.float64)
    _check_finite(arr, spec.path)
    return arr


def load_matrix(spec: MatrixFile) -> np.ndarray:
    """Read a dataset (rows = observations) from ``spec``."""
    if not Path(spec.path).is_file():
        raise FormatError(f"{spec.path}: no such file")
    if spec.format == "csv":
        return _load_csv(spec)
    if spec.format == "raw":
        return _load_raw(spec)
    raise FormatError(f"unknown matrix format {spec.format!r}")


def save_matrix(path, data, format: str = "csv", delimiter: str = ",") -> None:
    """Write ``data`` so that :func:`load_matrix` reads back identical bits."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidData("only 2-D matrices can be saved")
    if format == "csv":
        np.savetxt(path, arr, fmt="%.17g", delimiter=delimiter)
    elif format == "raw":
        np.ascontiguousarray(arr, dtype="<f8").tofile(path)
    else:
        raise FormatError(f"unknown matrix format {format!r}")


def dump_json(doc: dict, path=None) -> str:
    text = json.dumps(doc, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_schema(name: str) -> dict:
    """Bundled JSON schema, e.g. ``load_schema("test_result")``."""
    path = resources.files("fastkts") / "schemas" / f"{name}.schema.json"
    if not path.is_file():
        raise FormatError(f"no bundled schema named {name!r}")
    return json.loads(path.read_text())
