"""Trace files and synthetic traces.

CSV layout::

    timestamp_utc,value
    2023-01-01T00:00:00Z,1000000.0
    ...

Timestamps are ISO-8601 in UTC, one row per grid interval. Values are written
with ``repr`` (shortest round-trip decimal), so writing what was read
reproduces the file byte for byte.
"""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Union

import numpy as np

from . import rng
from .scenario import CarbonTrace, RequestTrace, TimeGrid

HEADER = ("timestamp_utc", "value")
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
RANDOM_TRACE_STREAM = 0x52414E44  # "RAND"
KINDS = {"requests": "requests/interval", "carbon": "gCO2/kWh"}


class TraceError(ValueError):
    pass


class TraceGapError(TraceError):
    pass


@dataclass(frozen=True)
class TraceFile:
    path: Path
    kind: str
    unit: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {sorted(KINDS)}, got {self.kind!r}")
        object.__setattr__(self, "path", Path(self.path))
        if not self.unit:
            object.__setattr__(self, "unit", KINDS[self.kind])


def format_timestamp(hour: float) -> str:
    return (EPOCH + timedelta(hours=float(hour))).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> float:
    """Hours since the Unix epoch for an ISO-8601 UTC timestamp."""
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return (dt - EPOCH).total_seconds() / 3600.0


def grid_start_for(timestamp: str) -> int:
    """``start_epoch_hour`` of a grid whose first interval is ``timestamp``."""
    return int(round(parse_timestamp(timestamp)))


def _read_rows(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TraceError(f"{path}: cannot read ({exc.strerror})") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceError(f"{path}: empty file") from None
    if tuple(h.strip() for h in header) != HEADER:
        raise TraceError(f"{path}: header must be {','.join(HEADER)}, got {','.join(header)}")
    hours, values = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise TraceError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        try:
            h = parse_timestamp(row[0])
        except ValueError:
            raise TraceError(f"{path}:{lineno}: bad timestamp {row[0]!r}") from None
        try:
            v = float(row[1])
        except ValueError:
            raise TraceError(f"{path}:{lineno}: bad value {row[1]!r}") from None
        if not math.isfinite(v):
            raise TraceError(f"{path}:{lineno}: non-finite value {row[1]!r}")
        if v < 0:
            raise TraceError(f"{path}:{lineno}: negative value {row[1]} at {row[0].strip()}")
        hours.append(h)
        values.append(v)
    return np.array(hours), np.array(values)


def load_trace_csv(
    path: Union[str, Path],
    kind: str,
    grid: TimeGrid,
    gap_policy: str = "error",
    user_group: str = "",
) -> Union[RequestTrace, CarbonTrace]:
    """Read a trace and align it to ``grid``.

    Rows outside the grid are ignored. ``gap_policy="forward-fill"`` repeats
    the previous value over missing intervals; ``"error"`` rejects them.
    """
    if gap_policy not in ("error", "forward-fill"):
        raise ValueError(f"unknown gap policy {gap_policy!r}")
    tf = TraceFile(Path(path), kind)
    hours, values = _read_rows(tf.path)
    if len(hours) == 0:
        raise TraceError(f"{tf.path}: no data rows")
    steps = np.diff(hours)
    if np.any(steps <= 0):
        k = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise TraceError(f"{tf.path}: timestamps not strictly increasing at {format_timestamp(hours[k])}")
    dh = grid.delta_hours
    idx = (hours - grid.start_epoch_hour) / dh
    if np.any(np.abs(idx - np.rint(idx)) > 1e-6):
        k = int(np.flatnonzero(np.abs(idx - np.rint(idx)) > 1e-6)[0])
        raise TraceError(f"{tf.path}: timestamp {format_timestamp(hours[k])} is off the grid")
    idx = np.rint(idx).astype(np.int64)
    inside = (idx >= 0) & (idx < grid.num_intervals)
    idx, values = idx[inside], values[inside]
    out = np.full(grid.num_intervals, np.nan)
    out[idx] = values
    missing = np.flatnonzero(np.isnan(out))
    if missing.size:
        first = format_timestamp(grid.start_epoch_hour + missing[0] * dh)
        if gap_policy == "error" or missing[0] == 0:
            raise TraceGapError(
                f"{tf.path}: {missing.size} of {grid.num_intervals} intervals missing, first at {first}"
            )
        for i in missing:
            out[i] = out[i - 1]
    if kind == "carbon":
        return CarbonTrace(out)
    return RequestTrace(user_group or tf.path.stem, out)


def atomic_write_text(path: Union[str, Path], text: str):
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


def trace_csv_text(values, grid: TimeGrid) -> str:
    values = np.asarray(getattr(values, "values", values), dtype=float)
    lines = [",".join(HEADER)]
    for i, v in enumerate(values):
        lines.append(f"{format_timestamp(grid.start_epoch_hour + i * grid.delta_hours)},{float(v)!r}")
    return "\n".join(lines) + "\n"


def write_trace_csv(path: Union[str, Path], values, grid: TimeGrid):
    atomic_write_text(path, trace_csv_text(values, grid))


# -- generators -------------------------------------------------------------


def gen_static(level: float, grid: TimeGrid, user_group: str = "static") -> RequestTrace:
    if level < 0:
        raise ValueError("level must be >= 0")
    return RequestTrace(user_group, np.full(grid.num_intervals, float(level)))


def gen_random_normal(
    mean: float, std: float, seed: int, grid: TimeGrid, user_group: str = "random"
) -> RequestTrace:
    """i.i.d. normal requests per interval, clamped at zero."""
    if mean < 0 or std < 0:
        raise ValueError("mean and std must be >= 0")
    z = rng.normals(seed, RANDOM_TRACE_STREAM, np.arange(grid.num_intervals))
    return RequestTrace(user_group, np.maximum(mean + std * z, 0.0))


def gen_sinusoid(
    mean: float, rel_amplitude: float, grid: TimeGrid, period: float = 24.0, phase: float = 0.0
) -> CarbonTrace:
    """``mean * (1 + rel_amplitude * sin(2 pi (i + phase) / period))``, clamped at zero."""
    i = np.arange(grid.num_intervals, dtype=float)
    vals = mean * (1.0 + rel_amplitude * np.sin(2.0 * np.pi * (i + phase) / period))
    return CarbonTrace(np.maximum(vals, 0.0))


def trace_stats(trace) -> dict:
    """Mean, population standard deviation, min and max."""
    v = np.asarray(getattr(trace, "values", trace), dtype=float)
    if v.size == 0:
        raise ValueError("empty trace")
    return {"mean": float(v.mean()), "std": float(v.std()), "min": float(v.min()), "max": float(v.max())}
