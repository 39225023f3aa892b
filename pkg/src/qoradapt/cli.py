"""Command line entry point: ``qoradapt <command> --scenario cfg.json --out dir``.

Exit codes: 0 success, 1 infeasible scenario or solver failure, 2 bad
configuration or arguments. Outputs are only written once a command has
computed everything, so a failed run leaves no partial files behind.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

from . import report
from .config import ConfigError, LoadedConfig, load_config, providers
from .emissions import savings_pct
from .optimizer.bnb import SolveBudget
from .optimizer.oracle import SearchSpaceTooLarge, brute_force_oracle
from .qor import mass_below, qor_cdf
from .scenario import InfeasibleError, TimeGrid, baseline_run
from .simulator import UNLIMITED_S, SolverError, make_trajectory, run_online, run_upper_bound, upper_bound_budget
from .traces_io import gen_random_normal, gen_sinusoid, gen_static, grid_start_for, trace_stats, write_trace_csv

log = logging.getLogger("qoradapt")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
# node limits used by --deterministic when the scenario sets none
DEFAULT_LONG_NODES = 200
DEFAULT_SHORT_NODES = 50


class UsageError(ValueError):
    pass


def _load(args) -> LoadedConfig:
    return load_config(
        args.scenario,
        gamma=args.gamma,
        qor_target=args.qor_target,
        tau=args.tau,
        time_limit_long=args.time_limit_long,
        time_limit_short=args.time_limit_short,
    )


def _deterministic_budgets(cfg: LoadedConfig) -> LoadedConfig:
    b = cfg.scenario.budgets
    b = dataclasses.replace(
        b,
        long_node_limit=b.long_node_limit or DEFAULT_LONG_NODES,
        short_node_limit=b.short_node_limit or DEFAULT_SHORT_NODES,
    )
    return dataclasses.replace(cfg, scenario=cfg.scenario.replace(budgets=b))


def _ub_budget(scenario, deterministic: bool) -> SolveBudget:
    b = upper_bound_budget(scenario)
    if deterministic:
        return SolveBudget(UNLIMITED_S, b.gap_target, b.node_limit)
    return b


def _summary(cfg, args, traj, baseline_g, status, gap, extra=None) -> dict:
    sc = cfg.scenario
    total = traj.total_g
    doc = {
        "command": args.command,
        "total_g": total,
        "total_t": total / report.GRAMS_PER_TONNE,
        "baseline_g": baseline_g,
        "savings_pct": savings_pct(total, baseline_g) if baseline_g > 0 else 0.0,
        "min_rolling_qor": traj.min_rolling_qor(sc.policy.validity_len),
        "qor_target": sc.policy.target,
        "gamma": sc.policy.validity_len,
        "feasible": traj.feasibility(sc).ok,
        "status": status,
        "gap": gap,
        "num_intervals": sc.num_intervals,
        "provenance": report.provenance(cfg.digest, args.seed, sc.budgets, status, args.deterministic),
    }
    if extra:
        doc.update(extra)
    return doc


def _result_files(cfg, traj, summary: dict, deterministic: bool, solves=None) -> dict:
    files = {
        "results.csv": report.results_csv(
            cfg.scenario, traj.deployment, traj.allocation, traj.emissions_g, traj.requests, traj.carbon
        ),
        "summary.json": report.json_text(summary),
    }
    if solves is not None:
        files["gaplog.csv"] = report.gaplog_csv(solves, timing=not deterministic)
    return files


def cmd_baseline(args) -> dict:
    cfg = _load(args)
    sc = cfg.scenario
    deploy, alloc, _ = baseline_run(sc)
    traj = make_trajectory(sc, deploy, alloc)
    extra = {}
    targets = cfg.document.get("baseline_targets")
    if targets:
        extra["target_sweep"] = [
            {"qor_target": t, "total_g": baseline_run(sc.with_policy(target=t))[2]} for t in targets
        ]
    summary = _summary(cfg, args, traj, traj.total_g, "baseline", 0.0, extra)
    return _result_files(cfg, traj, summary, args.deterministic)


def cmd_upper_bound(args) -> dict:
    cfg = _load(args)
    sc = cfg.scenario
    t0 = time.perf_counter()
    res, traj = run_upper_bound(sc, _ub_budget(sc, args.deterministic))
    _, _, base = baseline_run(sc)
    extra = {"bound_g": res.bound_g, "nodes": res.nodes}
    if not args.deterministic:
        extra["elapsed_s"] = time.perf_counter() - t0
    summary = _summary(cfg, args, traj, base, res.status, res.gap, extra)
    return _result_files(cfg, traj, summary, args.deterministic, traj.solves)


def cmd_online(args) -> dict:
    cfg = _load(args)
    if args.deterministic:
        cfg = _deterministic_budgets(cfg)
    sc = cfg.scenario
    req, carbon = providers(cfg, args.seed)
    t0 = time.perf_counter()
    traj = run_online(
        sc, req, carbon, deterministic=args.deterministic,
        log=lambda a, rec: log.info("interval %d: %s %s", a, rec.kind, rec.status),
    )
    _, _, base = baseline_run(sc)
    fallbacks = sum(1 for s in traj.solves if s.kind == "fallback")
    shorts = [s.gap for s in traj.solves if s.kind == "short"]
    extra = {"fallbacks": fallbacks, "solves": len(traj.solves)}
    if not args.deterministic:
        extra["elapsed_s"] = time.perf_counter() - t0
    ok = traj.feasibility(sc).ok
    status = "feasible" if ok else "qor_violated"
    gap = max(shorts) if shorts else None
    summary = _summary(cfg, args, traj, base, status, gap, extra)
    return _result_files(cfg, traj, summary, args.deterministic, traj.solves)


def _sweep_values(cfg, args, dimension):
    if args.values:
        try:
            cast = float if dimension == "qor_target" else int
            return [cast(v) for v in args.values.split(",")]
        except ValueError:
            raise UsageError(f"--values must be a comma separated list for {dimension}") from None
    vals = cfg.document.get("sweep", {}).get(dimension)
    if not vals:
        raise UsageError(f"no sweep values for {dimension}: pass --values or set sweep.{dimension}")
    return vals


def cmd_sweep(args) -> dict:
    cfg = _load(args)
    sc = cfg.scenario
    dim = args.dimension
    values = _sweep_values(cfg, args, dim)
    if dim == "beta":
        _, traj = run_upper_bound(sc, _ub_budget(sc, args.deterministic))
        rows = []
        for beta in values:
            cdf = qor_cdf(traj.allocation, traj.requests, int(beta))
            below = mass_below(cdf, sc.policy.target)
            rows.extend((int(beta), q, f, below) for q, f in cdf)
        text = report.sweep_csv(("beta", "qor", "cum_fraction", "mass_below_target"), rows)
        return {"sweep.csv": text}
    rows = []
    for v in values:
        run = sc.with_policy(target=v) if dim == "qor_target" else sc.with_policy(validity_len=v)
        _, _, base = baseline_run(run)
        res, traj = run_upper_bound(run, _ub_budget(run, args.deterministic))
        rows.append((v, base, traj.total_g, savings_pct(traj.total_g, base), res.status, res.gap))
    header = (dim, "baseline_g", "upper_bound_g", "savings_pct", "status", "gap")
    return {"sweep.csv": report.sweep_csv(header, rows)}


def cmd_oracle(args) -> dict:
    cfg = _load(args)
    sc = cfg.scenario
    try:
        res = brute_force_oracle(sc)
    except SearchSpaceTooLarge as exc:
        raise UsageError(str(exc)) from exc
    if res.status != "optimal":
        raise InfeasibleError("scenario admits no feasible deployment")
    traj = make_trajectory(sc, res.deployment, res.allocation)
    _, _, base = baseline_run(sc)
    summary = _summary(cfg, args, traj, base, "optimal", 0.0, {"search_space": res.search_space})
    return _result_files(cfg, traj, summary, args.deterministic)


def cmd_validate(args) -> dict:
    cfg = _load(args)
    sc = cfg.scenario
    print(
        f"ok: {sc.num_intervals} intervals, {len(sc.requests)} user group(s), "
        f"{len(sc.machines)} machine type(s), target {sc.policy.target}, gamma {sc.policy.validity_len}"
    )
    return {}


def cmd_gen_trace(args) -> dict:
    start = grid_start_for(args.start)
    grid = TimeGrid(args.delta_hours, args.intervals, start)
    if args.kind == "static":
        trace = gen_static(args.level, grid)
    elif args.kind == "random":
        trace = gen_random_normal(args.mean, args.std, args.seed, grid)
    else:
        trace = gen_sinusoid(args.mean, args.rel_amplitude, grid, args.period, args.phase)
    write_trace_csv(args.output, trace.values, grid)
    stats = trace_stats(trace)
    print(" ".join(f"{k}={v:.6g}" for k, v in stats.items()))
    return {}


COMMANDS = {
    "baseline": cmd_baseline,
    "upper-bound": cmd_upper_bound,
    "online": cmd_online,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
    "validate": cmd_validate,
    "gen-trace": cmd_gen_trace,
}


def _common(p: argparse.ArgumentParser, needs_out: bool = True):
    p.add_argument("--scenario", required=True, help="scenario JSON document")
    if needs_out:
        p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="forecast noise seed (u64)")
    p.add_argument("--gamma", type=int, help="override validity period")
    p.add_argument("--qor-target", type=float, help="override QoR target")
    p.add_argument("--tau", type=int, help="override long-term solve period")
    p.add_argument("--time-limit-long", type=float)
    p.add_argument("--time-limit-short", type=float)
    p.add_argument("--deterministic", action="store_true", help="node-limit budgets, no timings in reports")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qoradapt", description="Carbon-aware QoR adaptation planner")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("baseline", "upper-bound", "online", "oracle"):
        _common(sub.add_parser(name))
    sw = sub.add_parser("sweep")
    _common(sw)
    sw.add_argument("--dimension", required=True, choices=("qor_target", "gamma", "beta"))
    sw.add_argument("--values", help="comma separated sweep values (default: scenario 'sweep' block)")
    _common(sub.add_parser("validate"), needs_out=False)
    g = sub.add_parser("gen-trace")
    g.add_argument("--kind", required=True, choices=("static", "random", "sinusoid"))
    g.add_argument("--output", required=True, help="CSV file to write")
    g.add_argument("--intervals", type=int, required=True)
    g.add_argument("--start", default="2023-01-01T00:00:00Z")
    g.add_argument("--delta-hours", type=float, default=1.0)
    g.add_argument("--level", type=float, default=1e6)
    g.add_argument("--mean", type=float, default=1e6)
    g.add_argument("--std", type=float, default=0.33e6)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--rel-amplitude", type=float, default=0.3)
    g.add_argument("--period", type=float, default=24.0)
    g.add_argument("--phase", type=float, default=0.0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        files = COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, SolverError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if files:
        report.write_outputs(args.out, files)
        print(f"wrote {', '.join(sorted(files))} to {Path(args.out)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
