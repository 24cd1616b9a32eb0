"""File formats: headered CSV datasets, regret summaries and session documents.

Datasets are CSV with a header ``x_1..x_d,y_1..y_M``.  A row whose ``y``
cells are all empty is a pool candidate without an observation; a row with
every ``y`` cell filled is an observed point.  Numbers are written with the
shortest decimal that reads back to the same double, so files round-trip
bit for bit.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import DataError

SESSION_SCHEMA_VERSION = 1
SUMMARY_COLUMNS = ("strategy", "iteration", "mean_log10_regret", "std_log10_regret")

_COL = re.compile(r"^([xy])_([1-9][0-9]*)$")


def fmt(v: float) -> str:
    """Shortest round-trip decimal for a finite double."""
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"cannot serialize non-finite value {v}")
    return repr(v)


@dataclass(frozen=True, eq=False)
class TableData:
    """Parsed dataset CSV.

    ``Y`` rows are NaN where the row has no observation; ``observed`` marks
    the rows that have one.
    """

    X: np.ndarray
    Y: np.ndarray
    observed: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]

    @property
    def output_dim(self) -> int:
        return self.Y.shape[1]


def _parse_header(row, lineno, allow_x=True):
    xs, ys = [], []
    for cell in row:
        m = _COL.match(cell.strip())
        if m is None:
            raise DataError(f"bad column name {cell!r}; expected x_i or y_j", line=lineno)
        (xs if m.group(1) == "x" else ys).append(int(m.group(2)))
    d, M = len(xs), len(ys)
    if xs != list(range(1, d + 1)) or ys != list(range(1, M + 1)):
        raise DataError("columns must be x_1..x_d followed by y_1..y_M", line=lineno)
    if [c.strip()[0] for c in row] != ["x"] * d + ["y"] * M:
        raise DataError("all x columns must come before the y columns", line=lineno)
    if allow_x and d < 1:
        raise DataError("no input columns", line=lineno)
    if not allow_x and d:
        raise DataError("target file must only have y columns", line=lineno)
    if M < 1:
        raise DataError("no output columns", line=lineno)
    return d, M


def _parse_float(cell, lineno, name):
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"{name}: {cell!r} is not a number", line=lineno) from None
    if not math.isfinite(v):
        raise DataError(f"{name}: non-finite value {cell!r}", line=lineno)
    return v


def _rows(text):
    """(line number, cells) for every non-blank line."""
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        if row and any(c.strip() for c in row):
            yield reader.line_num, row


def parse_dataset_csv(text: str) -> TableData:
    rows = _rows(text)
    first = next(rows, None)
    if first is None:
        raise DataError("empty file; expected a header x_1..x_d,y_1..y_M", line=0)
    d, M = _parse_header(first[1], first[0])
    X, Y, obs = [], [], []
    for lineno, row in rows:
        if len(row) != d + M:
            raise DataError(f"expected {d + M} fields, got {len(row)}", line=lineno)
        X.append([_parse_float(c, lineno, f"x_{j + 1}") for j, c in enumerate(row[:d])])
        ycells = [c.strip() for c in row[d:]]
        if all(c == "" for c in ycells):
            Y.append([math.nan] * M)
            obs.append(False)
        elif any(c == "" for c in ycells):
            raise DataError("row has some but not all outputs filled", line=lineno)
        else:
            Y.append([_parse_float(c, lineno, f"y_{j + 1}") for j, c in enumerate(ycells)])
            obs.append(True)
    if not X:
        raise DataError("no data rows after the header", line=first[0])
    return TableData(np.array(X), np.array(Y), np.array(obs))


def format_dataset_csv(X, Y, observed=None) -> str:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, d = X.shape
    M = Y.shape[1]
    observed = np.ones(n, bool) if observed is None else np.asarray(observed, bool)
    lines = [",".join([f"x_{j + 1}" for j in range(d)] + [f"y_{j + 1}" for j in range(M)])]
    for i in range(n):
        ys = [fmt(v) for v in Y[i]] if observed[i] else [""] * M
        lines.append(",".join([fmt(v) for v in X[i]] + ys))
    return "\n".join(lines) + "\n"


def parse_target_csv(text: str) -> np.ndarray:
    rows = list(_rows(text))
    if not rows:
        raise DataError("empty file; expected a header y_1..y_M", line=0)
    lineno, header = rows[0]
    _, M = _parse_header(header, lineno, allow_x=False)
    if len(rows) != 2:
        raise DataError(f"target file needs exactly one data row, got {len(rows) - 1}",
                        line=rows[-1][0])
    lineno, row = rows[1]
    if len(row) != M:
        raise DataError(f"expected {M} fields, got {len(row)}", line=lineno)
    return np.array([_parse_float(c, lineno, f"y_{j + 1}") for j, c in enumerate(row)])


def format_target_csv(target) -> str:
    v = np.atleast_1d(np.asarray(target, dtype=float))
    return ",".join(f"y_{j + 1}" for j in range(v.size)) + "\n" + ",".join(fmt(x) for x in v) + "\n"


def format_summary_csv(rows) -> str:
    lines = [",".join(SUMMARY_COLUMNS)]
    for strategy, it, mean, std in rows:
        lines.append(f"{strategy},{int(it)},{fmt(mean)},{fmt(std)}")
    return "\n".join(lines) + "\n"


def parse_summary_csv(text: str) -> list:
    rows = list(_rows(text))
    if not rows:
        raise DataError("empty summary file", line=0)
    if tuple(c.strip() for c in rows[0][1]) != SUMMARY_COLUMNS:
        raise DataError(f"summary header must be {','.join(SUMMARY_COLUMNS)}", line=rows[0][0])
    out = []
    for lineno, row in rows[1:]:
        if len(row) != 4:
            raise DataError(f"expected 4 fields, got {len(row)}", line=lineno)
        try:
            out.append((row[0], int(row[1]), float(row[2]), float(row[3])))
        except ValueError as exc:
            raise DataError(str(exc), line=lineno) from None
    return out


# ---------------------------------------------------------------------------
# session documents


def dump_session(state: dict) -> str:
    doc = {"schema_version": SESSION_SCHEMA_VERSION, "session": state}
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def load_session(text: str) -> dict:
    if not text.strip():
        raise DataError("empty session file", line=0)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise DataError("not a session document (no schema_version)", line=1)
    if doc["schema_version"] != SESSION_SCHEMA_VERSION:
        raise DataError(
            f"session schema version {doc['schema_version']} is not supported "
            f"(expected {SESSION_SCHEMA_VERSION})", line=1,
        )
    if not isinstance(doc.get("session"), dict):
        raise DataError("session document has no session object", line=1)
    return doc["session"]


def read_text(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except FileNotFoundError:
        raise DataError(f"{path}: no such file", line=0) from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not UTF-8 text ({exc.reason})", line=0) from None


def write_text_atomic(path, text: str) -> None:
    """Write to a temporary sibling then rename over ``path``."""
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)),
                               prefix=".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
