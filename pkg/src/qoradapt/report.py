"""CSV and JSON report files.

Numbers are written with ``repr`` and JSON with sorted keys so identical runs
produce identical bytes. Wall-clock fields are left out when ``timing`` is
off.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .scenario import TIER1, TIER2, Scenario
from .traces_io import atomic_write_text, format_timestamp

RESULTS_HEADER = (
    "i", "timestamp_utc", "carbon_g_per_kwh", "requests",
    "a_tier1", "a_tier2", "d_tier1", "d_tier2", "emissions_g",
)
GRAMS_PER_TONNE = 1e6


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _csv(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else _num(c) for c in row))
    return "\n".join(lines) + "\n"


def _json_value(v):
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def json_text(doc: dict) -> str:
    return json.dumps(_json_value(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def results_csv(scenario: Scenario, deploy, alloc, emissions_g, requests=None, carbon=None) -> str:
    """One row per interval; allocations and machines are summed over user groups and types."""
    d = np.asarray(getattr(deploy, "values", deploy))
    a = np.asarray(getattr(alloc, "values", alloc), dtype=float)
    r = scenario.request_matrix if requests is None else np.asarray(requests)
    c = scenario.carbon.values if carbon is None else np.asarray(carbon)
    g = scenario.grid
    rows = []
    for i in range(len(d)):
        rows.append((
            i,
            format_timestamp(g.start_epoch_hour + i * g.delta_hours),
            float(c[i]),
            float(r[i].sum()),
            float(a[i, :, TIER1].sum()),
            float(a[i, :, TIER2].sum()),
            int(d[i, :, TIER1].sum()),
            int(d[i, :, TIER2].sum()),
            float(emissions_g[i]),
        ))
    return _csv(RESULTS_HEADER, rows)


def gaplog_csv(records, timing: bool = True) -> str:
    """Incumbent/bound trajectory of every solve, one row per recorded point.

    Without ``timing`` the elapsed column is left blank so reruns match byte
    for byte.
    """
    header = ("solve", "interval", "kind", "status", "elapsed_s", "nodes", "incumbent_g", "bound_g", "gap")
    rows = []
    for k, rec in enumerate(records):
        points = rec.trajectory or [None]
        for p in points:
            if p is None:
                t, nodes, inc, bound, gap = rec.elapsed_s, rec.nodes, rec.objective_g, rec.bound_g, rec.gap
            else:
                t, nodes, inc, bound, gap = p.elapsed_s, p.nodes, p.incumbent_g, p.bound_g, p.gap
            rows.append((k, rec.interval, rec.kind, rec.status, t if timing else "", nodes, inc, bound, gap))
    return _csv(header, rows)


def sweep_csv(header, rows) -> str:
    return _csv(header, rows)


def write_outputs(out_dir, files: dict):
    """Write every ``name -> text`` pair atomically, after all content exists."""
    out = Path(out_dir)
    for name, text in files.items():
        atomic_write_text(out / name, text)


def provenance(config_sha256: str, seed: Optional[int], budgets, status: str, deterministic: bool) -> dict:
    return {
        "config_sha256": config_sha256,
        "seed": seed,
        "budgets": {k: getattr(budgets, k) for k in budgets.__dataclass_fields__},
        "solver_status": status,
        "deterministic": deterministic,
    }
