"""JSON scenario documents: schema validation and construction."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import forecast as fc
from .scenario import (
    CarbonTrace,
    MachineType,
    QoRPolicy,
    QualityTierPair,
    RequestTrace,
    Scenario,
    SolverBudgets,
    TimeGrid,
    p4d_machine,
    validate_scenario,
)
from .traces_io import TraceError, gen_random_normal, gen_sinusoid, gen_static, grid_start_for, load_trace_csv


class ConfigError(ValueError):
    pass


def schema() -> dict:
    text = resources.files("qoradapt").joinpath("scenario.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(doc: Any) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


@dataclass
class LoadedConfig:
    document: dict
    scenario: Scenario
    base_dir: Path
    forecast: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return config_hash(self.document)


def read_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read scenario ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return doc


def check_schema(doc: dict):
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"/{'/'.join(str(p) for p in e.absolute_path)}: {e.message}" for e in errors[:10]]
        raise ConfigError("scenario does not match schema:\n  " + "\n  ".join(lines))


def apply_overrides(doc: dict, gamma=None, qor_target=None, tau=None, time_limit_long=None,
                    time_limit_short=None) -> dict:
    doc = copy.deepcopy(doc)
    if gamma is not None:
        doc["policy"]["validity_len"] = int(gamma)
    if qor_target is not None:
        doc["policy"]["target"] = float(qor_target)
    changes = {
        "tau": None if tau is None else int(tau),
        "long_time_limit_s": None if time_limit_long is None else float(time_limit_long),
        "short_time_limit_s": None if time_limit_short is None else float(time_limit_short),
    }
    changes = {k: v for k, v in changes.items() if v is not None}
    if changes:
        doc.setdefault("budgets", {}).update(changes)
    return doc


def _source(spec: dict, kind: str, grid: TimeGrid, base: Path, user_group: str = ""):
    if "file" in spec:
        path = Path(spec["file"])
        if not path.is_absolute():
            path = base / path
        try:
            return load_trace_csv(path, kind, grid, spec.get("gap_policy", "error"), user_group)
        except TraceError as exc:
            raise ConfigError(str(exc)) from exc
    if "values" in spec:
        vals = np.asarray(spec["values"], dtype=float)
    else:
        g = spec["generator"]
        k = g["kind"]
        if k == "static":
            vals = gen_static(g.get("level", 1e6), grid).values
        elif k == "random":
            vals = gen_random_normal(g.get("mean", 1e6), g.get("std", 0.33e6), g.get("seed", 0), grid).values
        else:
            vals = gen_sinusoid(
                g.get("mean", 300.0), g.get("rel_amplitude", 0.3), grid, g.get("period", 24.0),
                g.get("phase", 0.0),
            ).values
    if kind == "carbon":
        return CarbonTrace(vals)
    return RequestTrace(user_group, vals)


def _machine(spec: dict, delta_hours: float) -> MachineType:
    if "preset" in spec:
        return p4d_machine(delta_hours)
    return MachineType(
        spec["name"],
        tuple(spec["power_watts"]),
        tuple(spec["capacity_per_interval"]),
        spec.get("embodied_g_per_interval", 0.0),
    )


def build_scenario(doc: dict, base_dir=".") -> Scenario:
    base = Path(base_dir)
    g = doc["grid"]
    start = grid_start_for(g["start"]) if "start" in g else 0
    grid = TimeGrid(g.get("delta_hours", 1.0), g["num_intervals"], start)
    tiers = doc.get("tiers", {})
    scenario = Scenario(
        grid=grid,
        machines=tuple(_machine(m, grid.delta_hours) for m in doc["machines"]),
        requests=tuple(_source(r, "requests", grid, base, r["user_group"]) for r in doc["requests"]),
        carbon=_source(doc["carbon"], "carbon", grid, base),
        policy=QoRPolicy(float(doc["policy"]["target"]), int(doc["policy"]["validity_len"])),
        budgets=SolverBudgets(**doc.get("budgets", {})),
        tiers=QualityTierPair(tiers.get("tier1", "tier1"), tiers.get("tier2", "tier2")),
    )
    return scenario


def load_config(path, **overrides) -> LoadedConfig:
    """Read, validate and build a scenario document.

    Every problem is reported as ``ConfigError``.
    """
    path = Path(path)
    doc = apply_overrides(read_document(path), **overrides)
    check_schema(doc)
    try:
        scenario = build_scenario(doc, path.parent)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    problems = validate_scenario(scenario)
    if problems:
        raise ConfigError("invalid scenario:\n  " + "\n  ".join(problems))
    return LoadedConfig(doc, scenario, path.parent, doc.get("forecast", {}))


def providers(cfg: LoadedConfig, seed: int):
    """Request providers (one per user group) and the carbon provider."""
    sc = cfg.scenario
    f = cfg.forecast
    I = sc.num_intervals
    mode = f.get("requests", "perfect")
    if mode == "perfect":
        reqs = [fc.PerfectProvider(t.values) for t in sc.requests]
    elif mode == "constant":
        level = f.get("request_level")
        reqs = [fc.ConstantProvider(level if level is not None else float(np.mean(t.values)), I) for t in sc.requests]
    else:
        periods = f.get("seasonal_periods", [24, 168])
        reqs = [fc.SeasonalProvider(fc.fit_seasonal(t.values, periods), I) for t in sc.requests]
    if f.get("carbon", "perfect") == "perfect":
        carbon = fc.PerfectProvider(sc.carbon.values)
    else:
        carbon = fc.CompositeCarbonProvider(
            np.asarray(sc.carbon.values),
            mape_profile(f.get("mape_profile", "CISO")),
            _seasonal_model(cfg),
            seed,
            intervals_per_day=int(round(24 / sc.grid.delta_hours)),
            start_hour=int(sc.grid.start_epoch_hour) % 24,
        )
    return reqs, carbon


def mape_profile(spec) -> fc.MapeProfile:
    if isinstance(spec, str):
        try:
            return fc.MAPE_PROFILES[spec]
        except KeyError:
            raise ConfigError(f"unknown MAPE profile {spec!r}") from None
    return fc.MapeProfile("custom", tuple(spec))


def _seasonal_model(cfg: LoadedConfig) -> fc.SeasonalModel:
    """Seasonal carbon model fitted on the configured history.

    Without a history the model is fitted in-sample on the scenario's own
    carbon trace.
    """
    sc = cfg.scenario
    periods = cfg.forecast.get("seasonal_periods", [24, 168])
    hist = cfg.forecast.get("history")
    if hist is None:
        return fc.fit_seasonal(sc.carbon.values, periods)
    n = int(hist.get("num_intervals", 0)) or sc.num_intervals
    grid = TimeGrid(sc.grid.delta_hours, n, sc.grid.start_epoch_hour - int(n * sc.grid.delta_hours))
    trace = _source(hist, "carbon", grid, cfg.base_dir)
    return fc.fit_seasonal(trace.values, periods, start=-n)
