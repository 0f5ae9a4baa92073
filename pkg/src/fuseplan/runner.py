"""Experiment orchestration: config parsing, the experiment commands behind
the CLI subcommands, and deterministic CSV/JSON/plot-script emission.

Every command is reproducible: with the same config and seed the emitted
files are byte-identical (no timestamps, stable float formatting, fixed row
order).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .cost import Evaluator, INFEASIBLE, evaluate
from .generators import generate_benchmark
from .graph import (ComputationGraph, load_graph, load_partition, save_partition,
                    single_subgraph_partition, validate_partition)
from .hardware import (KB, CapacityGrid, HardwareConfig, HardwareSpace,
                       preset_config)
from .memory import allocate_regions
from .optim import (GAParams, run_dp, run_enumeration, run_ga, run_greedy,
                    run_sa, run_two_step)
from .schedule import derive_schedule

OUTPUT_DIR_ENV = "FUSEPLAN_OUT"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_INTERNAL = 3


class ConfigError(Exception):
    pass


class InfeasibleModelError(Exception):
    pass


MODES = ("partition_only", "codesign")


@dataclass
class ExperimentConfig:
    models: list = field(default_factory=list)   # (name, graph) pairs
    hardware: HardwareConfig = field(default_factory=HardwareConfig)
    space: HardwareSpace = field(default_factory=HardwareSpace)
    mode: str = "codesign"
    metric: str = "energy"
    alpha: float = 0.002
    alphas: list = field(default_factory=lambda: [0.0005, 0.002])
    cores: list = field(default_factory=lambda: [1, 2, 4])
    batches: list = field(default_factory=lambda: [1, 2, 8])
    algorithms: list = field(default_factory=lambda: ["greedy", "dp", "sa", "ga", "enum"])
    params: GAParams = field(default_factory=GAParams)
    per_capacity_budget: int = 5000
    enum_state_budget: int = 10_000_000
    enum_wall_timeout_s: float = 60.0
    seeds: list = field(default_factory=lambda: [0])
    output_dir: Path = Path("out")


def _load_model_spec(spec, base_dir: Path):
    if isinstance(spec, str):
        path = Path(spec)
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"model file not found: {path}")
        return path.stem, load_graph(path)
    if isinstance(spec, dict) and "generator" in spec:
        params = dict(spec.get("params", {}))
        name = spec.get("name") or "_".join(
            [spec["generator"]] + [f"{k}{v}" for k, v in sorted(params.items())])
        try:
            return name, generate_benchmark(spec["generator"], **params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad generator spec {spec!r}: {exc}") from None
    raise ConfigError(f"model spec must be a path or generator record, got {spec!r}")


def _hardware_from_doc(doc: dict):
    doc = dict(doc or {})
    grids_doc = doc.pop("grids", {})
    kw = {}
    for key, attr, scale in (("buffer_mode", "buffer_mode", None),
                             ("global_kb", "global_buf_bytes", KB),
                             ("weight_kb", "weight_buf_bytes", KB),
                             ("shared_kb", "shared_buf_bytes", KB),
                             ("region_limit", "region_limit", None),
                             ("util_threshold", "util_threshold", None),
                             ("dram_bw_gbs", "dram_bw_bytes_per_s", 1e9),
                             ("freq_ghz", "freq_hz", 1e9),
                             ("lcm_cap", "lcm_cap", None),
                             ("weight_prefetch", "weight_prefetch", None)):
        if key in doc:
            val = doc.pop(key)
            kw[attr] = val * scale if scale else val
    if doc:
        raise ConfigError(f"unknown hardware keys: {sorted(doc)}")
    try:
        hw = HardwareConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad hardware block: {exc}") from None

    def grid(key, default):
        if key not in grids_doc:
            return default
        lo, hi, step = grids_doc[key]
        return CapacityGrid(lo * KB, hi * KB, step * KB)

    from .hardware import GLOBAL_GRID, SHARED_GRID, WEIGHT_GRID
    space = HardwareSpace(base=hw,
                          global_grid=grid("global_kb", GLOBAL_GRID),
                          weight_grid=grid("weight_kb", WEIGHT_GRID),
                          shared_grid=grid("shared_kb", SHARED_GRID))
    return hw, space


def _params_from_doc(doc: dict):
    doc = dict(doc or {})
    doc.pop("algorithm", None)
    rates = doc.pop("mutation_rates", None)
    kw = {}
    for key in ("population", "budget", "crossover_rate", "tournament_size",
                "dse_sigma_steps", "merge_bias", "seed", "sa_t0", "sa_cooling"):
        if key in doc:
            kw[key] = doc.pop(key)
    if rates is not None:
        kw["mutation_rates"] = tuple(sorted(rates.items()))
    extra = {k: doc.pop(k) for k in ("per_capacity_budget", "enum_state_budget",
                                     "enum_wall_timeout_s") if k in doc}
    if doc:
        raise ConfigError(f"unknown optimizer keys: {sorted(doc)}")
    try:
        return GAParams(**kw), extra
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad optimizer block: {exc}") from None


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse an experiment config file; CLI overrides win over file values."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if overrides:
        doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
    base_dir = path.parent

    cfg = ExperimentConfig()
    model_specs = doc.get("models")
    if model_specs is None and "model" in doc:
        model_specs = [doc["model"]]
    if model_specs:
        cfg.models = [_load_model_spec(s, base_dir) for s in model_specs]
    cfg.hardware, cfg.space = _hardware_from_doc(doc.get("hardware", {}))
    cfg.params, extra = _params_from_doc(doc.get("optimizer", {}))
    cfg.per_capacity_budget = extra.get("per_capacity_budget", cfg.per_capacity_budget)
    cfg.enum_state_budget = extra.get("enum_state_budget", cfg.enum_state_budget)
    cfg.enum_wall_timeout_s = extra.get("enum_wall_timeout_s", cfg.enum_wall_timeout_s)
    cfg.mode = doc.get("mode", cfg.mode)
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    cfg.metric = doc.get("metric", cfg.metric)
    if cfg.metric not in ("ema", "energy"):
        raise ConfigError("metric must be 'ema' or 'energy'")
    cfg.alpha = float(doc.get("alpha", cfg.alpha))
    if cfg.alpha < 0:
        raise ConfigError("alpha must be >= 0")
    cfg.alphas = list(doc.get("alphas", cfg.alphas))
    cfg.cores = list(doc.get("cores", cfg.cores))
    cfg.batches = list(doc.get("batches", cfg.batches))
    cfg.algorithms = list(doc.get("algorithms", cfg.algorithms))
    cfg.seeds = list(doc.get("seeds", cfg.seeds))
    out = os.environ.get(OUTPUT_DIR_ENV) or doc.get("output_dir", "out")
    cfg.output_dir = Path(out) if Path(out).is_absolute() else base_dir / out
    return cfg


# ---------------------------------------------------------------------------
# deterministic emission helpers


def _fmt(value) -> str:
    if isinstance(value, float):
        if value == INFEASIBLE:
            return "inf"
        return repr(value)
    return str(value)


def write_csv(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_trace(path: Path, trace) -> None:
    write_csv(path, ["sample_index", "best_objective", "current_objective"],
              [(tp.sample, tp.best_objective, tp.current_objective) for tp in trace])


def write_gnuplot(path: Path, csv_name: str, title: str, xlabel: str, ylabel: str,
                  series: list) -> None:
    """Companion gnuplot script for a CSV (datafile separator ',')."""
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key outside",
        "plot \\",
    ]
    plots = [f"  '{csv_name}' using {cols} with {style} title '{name}'"
             for name, cols, style in series]
    lines.append(", \\\n".join(plots))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _norm(value, base):
    if base in (0, None) or value is None:
        return ""
    if value == INFEASIBLE or base == INFEASIBLE:
        return "inf"
    return value / base


# ---------------------------------------------------------------------------
# commands


def cmd_derive_scheme(graph: ComputationGraph, hw: HardwareConfig,
                      partition=None, tile_override=None, json_out=None,
                      stream=None):
    """Print per-subgraph schedules and region allocations; default partition
    is the whole graph in one subgraph (when feasible)."""
    import sys
    stream = stream or sys.stdout
    if partition is None:
        partition = single_subgraph_partition(graph)
        ev = Evaluator(graph, hw)
        if ev.first_infeasible(partition, hw) is not None:
            raise InfeasibleModelError(
                "whole graph does not fit this configuration; run `fuseplan partition` "
                "first and pass --partition")
    verdict = validate_partition(graph, partition)
    if not verdict.ok:
        raise ConfigError(f"invalid partition: {verdict.violations}")
    doc = {"subgraphs": {}}
    for i in range(partition.num_subgraphs):
        sched = derive_schedule(graph, partition, i, hw, tile_override=tile_override)
        alloc = allocate_regions(sched, graph, hw)
        print(f"subgraph {i}: steps={sched.steps_per_tensor} "
              f"(h={sched.steps_h}, w={sched.steps_w})"
              + (f" low-util={list(sched.low_util)}" if sched.low_util else ""),
              file=stream)
        print(f"  {'node':>6} {'delta':>9} {'tile':>9} {'upd':>4} "
              f"{'main_B':>8} {'side_B':>8}", file=stream)
        for nid in sched.exec_order:
            ns = sched.per_node[nid]
            reg = alloc.region_for(nid)
            print(f"  {nid:>6} {ns.delta_h:>4},{ns.delta_w:<4} "
                  f"{ns.tile_h:>4},{ns.tile_w:<4} {ns.upd_num:>4} "
                  f"{reg.main_bytes:>8} {reg.side_bytes:>8}", file=stream)
        print(f"  regions: {alloc.node_count} nodes, {alloc.total_bytes} bytes, "
              f"feasible={alloc.feasible}" + (f" ({alloc.reason})" if alloc.reason else ""),
              file=stream)
        doc["subgraphs"][str(i)] = {
            **sched.to_json(),
            "region_bytes": alloc.total_bytes,
            "feasible": alloc.feasible,
        }
    if json_out:
        write_json(Path(json_out), doc)
    return doc


def _run_algorithm(name, g, cfg: ExperimentConfig, seed, evaluator=None):
    """One partition-search algorithm at fixed hardware.  Returns
    (status, partition, trace, samples)."""
    hw = cfg.hardware
    params = replace(cfg.params, seed=seed)
    ev = evaluator or Evaluator(g, hw, cfg.metric, cfg.alpha)
    fixed = cfg.space.fixed_space(_choice_for(cfg.space, hw))
    if name == "greedy":
        return "ok", run_greedy(g, hw, cfg.metric, cfg.alpha, evaluator=ev), [], 0
    if name == "dp":
        return "ok", run_dp(g, hw, cfg.metric, cfg.alpha, evaluator=ev), [], 0
    if name == "enum":
        res = run_enumeration(g, hw, cfg.metric, cfg.alpha,
                              budget_states=cfg.enum_state_budget,
                              wall_timeout_s=cfg.enum_wall_timeout_s, evaluator=ev)
        return res.status, res.partition, [], res.states
    if name == "ga":
        res = run_ga(g, fixed, params, cfg.metric, "partition_only", cfg.alpha,
                     evaluator=ev)
    elif name == "sa":
        res = run_sa(g, fixed, params, cfg.metric, "partition_only", cfg.alpha,
                     evaluator=ev)
    else:
        raise ConfigError(f"unknown algorithm {name!r}")
    from .graph import partition_from_tuple
    return "ok", partition_from_tuple(g, res.best.partition), res.trace, res.samples


def _choice_for(space: HardwareSpace, hw: HardwareConfig) -> tuple:
    if space.mode == "shared":
        return (space.shared_grid.nearest_index(hw.shared_buf_bytes),)
    return (space.global_grid.nearest_index(hw.global_buf_bytes),
            space.weight_grid.nearest_index(hw.weight_buf_bytes))


def cmd_compare_partitioners(cfg: ExperimentConfig) -> Path:
    """Fixed-hardware comparison of the partitioners across models.

    Emits absolute and greedy-normalized EMA and bandwidth columns (average
    and peak, since the normalization base is reported both ways)."""
    out = cfg.output_dir
    rows = []
    seed = cfg.seeds[0]
    for mname, g in cfg.models:
        ev = Evaluator(g, cfg.hardware, cfg.metric, cfg.alpha)
        base = {}
        for algo in cfg.algorithms:
            status, partition, trace, samples = _run_algorithm(algo, g, cfg, seed, ev)
            if status != "ok" or partition is None:
                rows.append([mname, algo, status] + [""] * 7 + [samples])
                continue
            rep = ev.evaluate_partition(partition, cfg.hardware)
            if algo == "greedy":
                base = {"ema": rep.ema_bytes,
                        "avg": rep.avg_bandwidth_bytes_per_s,
                        "peak": rep.peak_bandwidth_bytes_per_s}
            rows.append([
                mname, algo, status, rep.ema_bytes,
                _norm(rep.ema_bytes, base.get("ema")),
                rep.avg_bandwidth_bytes_per_s,
                _norm(rep.avg_bandwidth_bytes_per_s, base.get("avg")),
                rep.peak_bandwidth_bytes_per_s,
                _norm(rep.peak_bandwidth_bytes_per_s, base.get("peak")),
                rep.objective_partition, samples,
            ])
            save_partition(partition, _ensure_dir(out) / f"partition_{mname}_{algo}.json")
            if trace:
                write_trace(out / f"trace_{mname}_{algo}.csv", trace)
    header = ["model", "algorithm", "status", "ema_bytes", "ema_norm_greedy",
              "bw_avg_bytes_s", "bw_avg_norm_greedy", "bw_peak_bytes_s",
              "bw_peak_norm_greedy", "objective", "samples"]
    write_csv(out / "compare.csv", header, rows)
    write_gnuplot(out / "compare.gp", "compare.csv",
                  "Partitioner comparison (normalized to greedy)",
                  "model/algorithm", "normalized EMA",
                  [("ema_norm", "5:xtic(2)", "boxes")])
    return out / "compare.csv"


COEXPLORE_ROWS = ("fixed_S", "fixed_M", "fixed_L", "rs_ga", "gs_ga", "sa", "ga")


def cmd_coexplore(cfg: ExperimentConfig) -> Path:
    """Capacity/partition co-exploration table: fixed-HW presets, two-step
    schemes and the co-optimizing searches, each at the same sample budget."""
    if cfg.mode != "codesign":
        raise ConfigError("coexplore requires mode=codesign")
    out = cfg.output_dir
    rows = []
    seed = cfg.seeds[0]
    for mname, g in cfg.models:
        ev = Evaluator(g, cfg.hardware, cfg.metric, cfg.alpha)
        for row in COEXPLORE_ROWS:
            params = replace(cfg.params, seed=seed)
            row_space = cfg.space
            if row.startswith("fixed_"):
                hw_row = preset_config(cfg.hardware, row[-1])
                row_space = cfg.space.fixed_space(_choice_for(cfg.space, hw_row))
                res = run_ga(g, row_space, params, cfg.metric, "codesign", cfg.alpha,
                             evaluator=ev)
            elif row == "rs_ga":
                res = run_two_step(g, cfg.space, "random", cfg.per_capacity_budget,
                                   params.budget, cfg.metric, cfg.alpha, params, ev)
            elif row == "gs_ga":
                res = run_two_step(g, cfg.space, "grid", cfg.per_capacity_budget,
                                   params.budget, cfg.metric, cfg.alpha, params, ev)
            elif row == "sa":
                res = run_sa(g, cfg.space, params, cfg.metric, "codesign", cfg.alpha,
                             evaluator=ev)
            else:
                res = run_ga(g, cfg.space, params, cfg.metric, "codesign", cfg.alpha,
                             evaluator=ev)
            hw_best = row_space.config_for(res.best.hw_choice)
            sizes = ([hw_best.shared_buf_bytes // KB] if cfg.space.mode == "shared"
                     else [hw_best.global_buf_bytes // KB, hw_best.weight_buf_bytes // KB])
            rows.append([mname, row] + sizes + [res.best.objective, res.samples])
            if res.trace:
                write_trace(out / f"trace_coexplore_{mname}_{row}.csv", res.trace)
    size_cols = (["size_shared_kb"] if cfg.space.mode == "shared"
                 else ["size_global_kb", "size_weight_kb"])
    header = ["model", "method"] + size_cols + ["cost", "samples"]
    write_csv(out / "coexplore.csv", header, rows)
    write_gnuplot(out / "coexplore.gp", "coexplore.csv",
                  "Co-exploration cost by method", "method", "cost",
                  [("cost", f"{len(header) - 1}:xtic(2)", "boxes")])
    return out / "coexplore.csv"


def cmd_alpha_sweep(cfg: ExperimentConfig) -> Path:
    """Capacity/metric trade-off across the configured alpha list."""
    if len(cfg.alphas) < 2:
        raise ConfigError("alpha-sweep needs at least two alphas")
    out = cfg.output_dir
    rows = []
    seed = cfg.seeds[0]
    for mname, g in cfg.models:
        ev = Evaluator(g, cfg.hardware, cfg.metric, 0.0)
        base_metric = None
        prev_cap = None
        for a in cfg.alphas:
            params = replace(cfg.params, seed=seed)
            ev.alpha = a
            res = run_ga(g, cfg.space, params, cfg.metric, "codesign", a, evaluator=ev)
            hw_best = cfg.space.config_for(res.best.hw_choice)
            rep = Evaluator(g, hw_best, cfg.metric, a).evaluate_partition(
                res.best.partition, hw_best)
            metric_total = rep.objective_partition
            if base_metric is None:
                base_metric = metric_total
            cap = hw_best.buf_total_bytes
            flag = "" if prev_cap is None or cap >= prev_cap else "capacity_decreased"
            rows.append([mname, a, cap // KB, metric_total,
                         _norm(metric_total, base_metric), res.best.objective, flag])
            prev_cap = cap
    header = ["model", "alpha", "capacity_kb", "metric_total",
              "metric_norm_first_alpha", "objective", "flag"]
    write_csv(out / "alpha_sweep.csv", header, rows)
    write_gnuplot(out / "alpha_sweep.gp", "alpha_sweep.csv",
                  "Capacity vs metric trade-off", "alpha", "normalized metric",
                  [("metric", "2:5", "linespoints")])
    return out / "alpha_sweep.csv"


def cmd_multicore(cfg: ExperimentConfig) -> Path:
    """Multi-core / batch grid, each cell co-explored independently."""
    if not cfg.cores or not cfg.batches:
        raise ConfigError("multicore needs non-empty cores and batches lists")
    out = cfg.output_dir
    rows = []
    seed = cfg.seeds[0]
    for mname, g in cfg.models:
        for c in cfg.cores:
            for b in cfg.batches:
                ev = Evaluator(g, cfg.hardware, cfg.metric, cfg.alpha,
                               cores=c, batch=b)
                params = replace(cfg.params, seed=seed)
                res = run_ga(g, cfg.space, params, cfg.metric, "codesign", cfg.alpha,
                             evaluator=ev)
                hw_best = cfg.space.config_for(res.best.hw_choice)
                rep = Evaluator(g, hw_best, cfg.metric, cfg.alpha, cores=c, batch=b) \
                    .evaluate_partition(res.best.partition, hw_best)
                rows.append([mname, c, b, rep.energy_pj / 1e9,
                             rep.latency_s * 1e3, hw_best.buf_total_bytes // KB,
                             res.best.objective])
    header = ["model", "cores", "batch", "energy_mj", "latency_ms",
              "size_per_core_kb", "objective"]
    write_csv(out / "multicore.csv", header, rows)
    return out / "multicore.csv"


def cmd_partition(cfg: ExperimentConfig, algorithm: str) -> Path:
    """Run one partitioner on one model; write partition + report + trace."""
    if len(cfg.models) != 1:
        raise ConfigError("partition works on exactly one model")
    mname, g = cfg.models[0]
    ev = Evaluator(g, cfg.hardware, cfg.metric, cfg.alpha)
    status, partition, trace, samples = _run_algorithm(
        algorithm, g, cfg, cfg.seeds[0], ev)
    out = cfg.output_dir
    if status != "ok" or partition is None:
        write_json(out / f"partition_{mname}_{algorithm}.status.json",
                   {"status": status, "samples": samples})
        raise InfeasibleModelError(f"{algorithm} returned status {status}")
    rep = ev.evaluate_partition(partition, cfg.hardware)
    save_partition(partition, _ensure_dir(out) / f"partition_{mname}_{algorithm}.json")
    write_json(out / f"report_{mname}_{algorithm}.json", rep.to_json())
    if trace:
        write_trace(out / f"trace_{mname}_{algorithm}.csv", trace)
    if not rep.feasible:
        raise InfeasibleModelError(rep.reason)
    return out / f"partition_{mname}_{algorithm}.json"


def cmd_report(outdir: Path, stream=None) -> str:
    """Summarize previously emitted result files in one markdown report."""
    import sys
    stream = stream or sys.stdout
    outdir = Path(outdir)
    if not outdir.exists():
        raise ConfigError(f"output dir {outdir} does not exist")
    lines = ["# fuseplan results", ""]
    for name in sorted(p.name for p in outdir.glob("*.csv")):
        lines.append(f"## {name}")
        with open(outdir / name) as fh:
            reader = csv.reader(fh)
            table = list(reader)
        if not table:
            continue
        lines.append("| " + " | ".join(table[0]) + " |")
        lines.append("|" + "---|" * len(table[0]))
        for row in table[1:]:
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
    text = "\n".join(lines) + "\n"
    (outdir / "summary.md").write_text(text)
    print(f"wrote {outdir / 'summary.md'}", file=stream)
    return text


def _ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path
