"""Experiment execution: single configs, seed replicates, parameter sweeps.

Outputs one CSV per (algorithm, seed) plus a JSON summary. Runs are pure
functions of (config, seed, code version); only the wall_seconds column
varies between repetitions.
"""

from __future__ import annotations

import csv
import json
import os
import time
from pathlib import Path

import numpy as np

from decbilevel import __version__
from decbilevel.algorithms import DivergenceError, Schedule, init_network, run
from decbilevel.harness.config import ConfigError, ExperimentConfig, config_from_dict
from decbilevel.hypergrad import EstimatorConfig, K_for_horizon
from decbilevel.metrics import CSV_COLUMNS, exact_metric, rate_slope
from decbilevel.numerics import RngStream, draw_gaussian
from decbilevel.problems import (
    load_libsvm,
    logistic_hyperopt_problem,
    make_synthetic_dataset,
    quadratic_problem,
)
from decbilevel.topology import erdos_renyi, laplacian_matrix, metropolis_matrix


def output_root() -> Path:
    """Directory all experiment output paths are resolved against."""
    return Path(os.environ.get("DECBILEVEL_OUT", "."))


def build_world(cfg: ExperimentConfig):
    """Construct (oracle, consensus matrix, estimator config, K) from config."""
    topo = cfg.topology
    graph = erdos_renyi(topo["m"], topo["p_c"],
                        RngStream(topo["seed"], ("topology",)))
    builder = laplacian_matrix if topo["matrix"] == "laplacian" else metropolis_matrix
    cm = builder(graph)
    prob = cfg.problem
    prob_stream = RngStream(prob["seed"], ("problem",))
    if prob["kind"] == "quadratic":
        oracle = quadratic_problem(
            topo["m"], prob["d_up"], prob["d_low"], prob["conditioning"],
            prob["sigma_f"], prob["sigma_g"], prob_stream, rho=prob["rho"],
        )
    else:
        if prob["libsvm_path"]:
            dataset = load_libsvm(prob["libsvm_path"], p=prob["p"])
        else:
            dataset = make_synthetic_dataset(prob["n_per_agent"], prob["p"],
                                             prob["separation"], prob_stream,
                                             m=topo["m"])
        oracle = logistic_hyperopt_problem(topo["m"], dataset,
                                           prob["batch_size"], prob_stream)
    k = cfg.K if cfg.K != "auto" else K_for_horizon(oracle.constants, cfg.T)
    est_cfg = EstimatorConfig.from_constants(oracle.constants, k,
                                             derandomize=cfg.derandomize)
    return oracle, cm, est_cfg, k


def _initial_point(cfg: ExperimentConfig, oracle):
    s = RngStream(cfg.problem["seed"], ("init",))
    x0 = draw_gaussian(s.lane_stream("x"), oracle.d_up, cfg.init_scale)
    y0 = draw_gaussian(s.lane_stream("y"), oracle.d_low, cfg.init_scale)
    return x0, y0


def _write_csv(path: Path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v
                             for v in rec.as_row()])


def _slope_or_none(records, cfg: ExperimentConfig):
    try:
        return rate_slope(records, max(1, cfg.cadence), cfg.T)
    except ValueError:
        return None


def run_experiment(cfg: ExperimentConfig, quiet: bool = True) -> dict:
    """Run every (algorithm, seed) pair; emit per-run CSVs + summary.json.

    A diverged seed is quarantined: its partial records are still written
    and the summary marks the failing iteration, but other seeds proceed.
    Returns the summary dict (also written atomically to disk).
    """
    out_dir = output_root() / cfg.out
    out_dir.mkdir(parents=True, exist_ok=True)
    oracle, cm, est_cfg, k = build_world(cfg)
    x0, y0 = _initial_point(cfg, oracle)
    results = {}
    used_names = set()
    for algo in cfg.algorithms:
        per_seed = []
        for seed in cfg.seeds:
            net = init_network(cm.m, x0, y0)
            start = time.perf_counter()
            hook = lambda n: exact_metric(n, oracle,
                                          wall_seconds=time.perf_counter() - start)
            diverged_at = None
            try:
                records = run(algo, net, cm, oracle, est_cfg, cfg.schedule,
                              cfg.T, RngStream(seed), metric_hook=hook,
                              cadence=cfg.cadence)
            except DivergenceError as exc:
                diverged_at = exc.t
                records = exc.records
            base = f"{algo}_seed{seed}"
            name = base
            dup = 1
            while name in used_names:
                dup += 1
                name = f"{base}r{dup}"
            used_names.add(name)
            csv_path = out_dir / f"{name}.csv"
            _write_csv(csv_path, records)
            final = records[-1] if records else None
            entry = {
                "seed": seed,
                "csv": csv_path.name,
                "diverged_at": diverged_at,
                "final_metric_M": None if final is None else final.metric_M,
                "final_upper_loss": None if final is None else final.upper_loss,
                "rate_slope": None if diverged_at is not None or final is None
                else _slope_or_none(records, cfg),
            }
            per_seed.append(entry)
            if not quiet:
                status = f"diverged at t={diverged_at}" if diverged_at else \
                    f"metric_M={entry['final_metric_M']:.3e}"
                print(f"  {algo} seed {seed}: {status}")
        finals = [e["final_metric_M"] for e in per_seed
                  if e["diverged_at"] is None and e["final_metric_M"] is not None]
        losses = [e["final_upper_loss"] for e in per_seed
                  if e["diverged_at"] is None and e["final_upper_loss"] is not None]
        slopes = [e["rate_slope"] for e in per_seed if e["rate_slope"] is not None]
        results[algo] = {
            "per_seed": per_seed,
            "final_metric_median": float(np.median(finals)) if finals else None,
            "final_upper_loss_median": float(np.median(losses)) if losses else None,
            "rate_slope_median": float(np.median(slopes)) if slopes else None,
            "diverged_seeds": [e["seed"] for e in per_seed
                               if e["diverged_at"] is not None],
        }
    ranked = sorted(
        (a for a in results if results[a]["final_metric_median"] is not None),
        key=lambda a: results[a]["final_metric_median"],
    )
    summary = {
        "config": cfg.echo,
        "code_version": __version__,
        "K_resolved": k,
        "lambda": cm.lam,
        "results": results,
        "ranking_by_final_metric": ranked,
    }
    tmp = out_dir / "summary.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    os.replace(tmp, out_dir / "summary.json")
    return summary


def _set_dotted(raw: dict, axis: str, value):
    # The axis must name an existing field of the resolved config.
    parts = axis.split(".")
    node = raw
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"sweep axis {axis!r} does not name a config field")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"sweep axis {axis!r} does not name a config field")
    node[parts[-1]] = value


def _axis_token(value) -> str:
    return str(value).replace("/", "_").replace(" ", "")


def sweep(cfg: ExperimentConfig, axis: str, values, quiet: bool = True) -> list:
    """Run the config once per axis value, collecting a long-format table.

    The axis is a dotted config path (e.g. "topology.p_c", "K",
    "schedule.c_eta"); each run lands in a subdirectory of the config's
    output path and the combined rows are written to sweep.csv there.
    """
    if not values:
        raise ConfigError(f"sweep over {axis!r}: empty value list")
    rows = []
    out_dir = output_root() / cfg.out
    for value in values:
        raw = json.loads(json.dumps(cfg.echo))  # deep copy of the resolved config
        _set_dotted(raw, axis, value)
        raw["out"] = str(Path(cfg.out) / f"{axis.replace('.', '_')}_{_axis_token(value)}")
        try:
            sub_cfg = config_from_dict(raw)
        except ConfigError as exc:
            raise ConfigError(f"sweep over {axis!r}: {exc}") from exc
        summary = run_experiment(sub_cfg, quiet=quiet)
        for algo, res in summary["results"].items():
            for entry in res["per_seed"]:
                rows.append({
                    "axis": axis,
                    "value": value,
                    "algorithm": algo,
                    "seed": entry["seed"],
                    "final_metric_M": entry["final_metric_M"],
                    "rate_slope": entry["rate_slope"],
                    "diverged_at": entry["diverged_at"],
                })
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return rows
