"""Report serialization, CSV output and run manifests.

All writes go through a temporary file in the target directory followed by
``os.replace``, so readers never see a half-written file.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .evolution import Trajectory
from .experiments import ExperimentReport
from .normalform import RatioReport

__all__ = [
    "SCHEMA_VERSION",
    "TRAJECTORY_HEADER",
    "DIAGNOSTIC_HEADER",
    "REPORT_HEADER",
    "atomic_write_text",
    "write_report",
    "read_report",
    "report_to_dict",
    "report_from_dict",
    "write_csv",
    "trajectory_rows",
    "report_rows",
    "format_float",
]

SCHEMA_VERSION = 1
TRAJECTORY_HEADER = ("t", "n", "re_c", "im_c")
DIAGNOSTIC_HEADER = ("t", "metric", "value")
REPORT_HEADER = ("param", "error", "slope_window")

_KINDS = {"ExperimentReport": ExperimentReport, "RatioReport": RatioReport}


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to JSON-ready builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def report_to_dict(report) -> dict:
    kind = type(report).__name__
    if kind not in _KINDS:
        raise FormatError(f"cannot serialize {kind}")
    body = {f.name: _plain(getattr(report, f.name)) for f in dataclasses.fields(report)}
    return {"schema_version": SCHEMA_VERSION, "kind": kind, "report": body}


def report_from_dict(data: dict):
    if not isinstance(data, dict) or "schema_version" not in data:
        raise FormatError("not a serialized report")
    if data["schema_version"] != SCHEMA_VERSION:
        raise FormatError(
            f"schema version {data['schema_version']} does not match {SCHEMA_VERSION}"
        )
    cls = _KINDS.get(data.get("kind"))
    if cls is None:
        raise FormatError(f"unknown report kind {data.get('kind')!r}")
    body = dict(data.get("report") or {})
    names = {f.name for f in dataclasses.fields(cls)}
    if set(body) != names:
        raise FormatError(f"field mismatch: {sorted(set(body) ^ names)}")
    if cls is RatioReport:
        for key in ("params", "ratios", "sample_ratios"):
            body[key] = tuple(body[key])
    try:
        return cls(**body)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"invalid report body: {exc}") from exc


def write_report(report, path) -> Path:
    """Serialize to JSON. Non-finite numbers are rejected (FormatError)."""
    try:
        text = json.dumps(report_to_dict(report), allow_nan=False, indent=2, sort_keys=True)
    except ValueError as exc:
        raise FormatError(f"report contains non-finite values: {exc}") from exc
    return atomic_write_text(path, text + "\n")


def read_report(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read report {path}: {exc}") from exc
    return report_from_dict(data)


# --- CSV ---------------------------------------------------------------------------


def format_float(x) -> str:
    """Shortest round-tripping representation; deterministic across runs."""
    if x is None or x == "":
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path, header, rows) -> Path:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise FormatError(f"row {row!r} does not match header {header}")
        lines.append(",".join(v if isinstance(v, str) else format_float(v) for v in row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def trajectory_rows(traj: Trajectory):
    """Long form ``t, n, re_c, im_c`` with frequencies in increasing order."""
    grid = traj.grid
    order = np.argsort(grid.indices, kind="stable")
    for t, c in zip(traj.times, traj.coeffs):
        for slot in order:
            yield (float(t), int(grid.indices[slot]), float(c[slot].real), float(c[slot].imag))


def report_rows(params, errors):
    """``param, error, slope_window``: the last column is the log-log slope
    between the previous grid point and this one (empty on the first row)."""
    rows = []
    for i, (p, e) in enumerate(zip(params, errors)):
        slope = ""
        if i > 0 and e > 0 and errors[i - 1] > 0 and p != params[i - 1]:
            slope = math.log(e / errors[i - 1]) / math.log(p / params[i - 1])
        rows.append((p, e, slope))
    return rows
