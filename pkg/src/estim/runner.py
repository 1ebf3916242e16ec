"""Experiment execution and result persistence.

A run writes, under its output directory:

    config.json      exact config echo plus its hash
    trace.ndjson     one JSON object per (replicate, iteration) or
                     (replicate, T) cell: bounds, estimates, summary stats
    estimates.csv    tidy per-(replicate, group, parameter) estimates
    metrics.csv      bias / sd / rmse per (group, parameter)
    samples/         raw training targets and bootstrap draws (optional)
    timings.json     wall-clock times (kept out of the deterministic files)
    network.json     the pre-trained network (replication presets)

Every delimited file carries the config hash in a leading comment line.
Given the same config (seed included), all files except timings.json are
byte-identical across reruns.
"""

from __future__ import annotations

import os
import time

import numpy as np

from .core import RngStream
from .errors import ConfigError
from .fileio import canonical_json, write_csv, write_json
from .metrics import metrics_row
from .models import build_model
from .neural import NetworkSpec, TrainConfig, save_network, train
from .presets import config_hash, validate_config
from .replication import estimate_any
from .sequential import (
    ParamBounds,
    SequentialConfig,
    run_sequential,
    sample_prior,
    simulate_rows,
)
from .simulators import fit_powexp

__all__ = ["run_experiment", "recompute_metrics", "load_run"]

ESTIMATE_COLUMNS = [
    "replicate", "group", "parameter", "estimate", "theta_hat",
    "sd", "interval_lo", "interval_hi", "rescale", "stopped",
]
METRIC_COLUMNS = ["group", "parameter", "n", "bias", "sd", "rmse"]
SAMPLE_COLUMNS = ["replicate", "group", "parameter", "value"]


def _initial_bounds(cfg: dict, model, x0: np.ndarray) -> ParamBounds:
    seq = cfg["sequential"]
    if seq.get("bounds0"):
        return ParamBounds.from_dict(seq["bounds0"])
    init = seq.get("init")
    if not init:
        raise ConfigError("sequential config needs bounds0 or an init rule")
    # Data-driven start: fit a powered-exponential variogram to the
    # observed field and center the log-range box on the fitted range.
    field = np.asarray(x0).ravel()
    if getattr(model, "log_data", False):
        field = np.exp(field)  # variogram fit sees the raw field
    fit = fit_powexp(field[None, :], model.grid)
    half = float(init["range_log_halfwidth"])
    s_lo, s_hi = init["smoothness_bounds"]
    lo = [np.log(fit.alpha) - half, s_lo]
    hi = [np.log(fit.alpha) + half, s_hi]
    return ParamBounds(np.array(lo), np.array(hi))


def _run_sequential_preset(cfg: dict, out_dir: str) -> dict:
    seq = cfg["sequential"]
    model = build_model(cfg["model"]["family"], cfg["model"])
    net_spec = NetworkSpec.from_dict(cfg["net"])
    train_cfg = TrainConfig.from_dict(cfg["train"])
    truth = np.asarray(cfg["truth_theta"], dtype=np.float64)
    master = RngStream(int(cfg["seed"]))

    trace_lines: list[str] = []
    estimate_rows: list[list] = []
    train_sample_rows: list[list] = []
    boot_sample_rows: list[list] = []
    timings: dict = {}
    per_iter_estimates: dict = {}  # iteration -> {replicate -> median vector}
    converged_all = True
    names = cfg["param_names"]

    for rep in range(int(cfg["replicates"])):
        rep_rng = master.child("rep", rep)
        x0 = model.simulate(truth, rep_rng.child("data"))
        bounds0 = _initial_bounds(cfg, model, x0)
        run_cfg = SequentialConfig(
            model=model,
            net_spec=net_spec,
            train_cfg=train_cfg,
            bounds0=bounds0,
            x0=x0,
            n0=int(seq["n0"]),
            b=int(seq["b"]),
            gamma=float(seq["gamma"]),
            max_iterations=int(seq["max_iterations"]),
            grow_n=bool(seq.get("grow_n", False)),
            replay_fraction=float(seq.get("replay_fraction", 0.0)),
            bounds_rule=seq.get("bounds_rule", "basic-bootstrap"),
            interval_alphas=tuple(seq.get("interval_alphas", (0.025, 0.975))),
        )
        t0 = time.perf_counter()
        result = run_sequential(run_cfg, rep_rng.child("seq"))
        timings[str(rep)] = {
            "total": time.perf_counter() - t0,
            "iterations": {str(t.iteration): t.wall_time for t in result.traces},
        }
        converged_all &= result.converged

        for tr in result.traces:
            trace_lines.append(canonical_json({"replicate": rep, **tr.stats_dict()}))
            med = tr.summary.median
            per_iter_estimates.setdefault(tr.iteration, {})[rep] = med
            for j, name in enumerate(names):
                estimate_rows.append([
                    rep, tr.iteration, name,
                    float(med[j]), float(tr.theta_hat[j]),
                    float(tr.summary.sd[j]),
                    float(tr.summary.interval_lo[j]),
                    float(tr.summary.interval_hi[j]),
                    1.0, tr.stopped,
                ])
            if cfg.get("dump_samples", True):
                for j, name in enumerate(names):
                    col = tr.train_theta[:, j]
                    train_sample_rows.extend(
                        [rep, tr.iteration, name, float(v)] for v in col
                    )
                    boot = tr.summary.samples[:, j]
                    boot_sample_rows.extend(
                        [rep, tr.iteration, name, float(v)] for v in boot
                    )

    # Carry stopped replicates forward so every iteration row aggregates
    # all replicates (a converged replicate keeps its final estimate).
    max_iter = max(per_iter_estimates)
    metric_rows: list[list] = []
    last_seen: dict = {}
    for k in range(1, max_iter + 1):
        for rep, med in per_iter_estimates.get(k, {}).items():
            last_seen[rep] = med
        est = np.array([last_seen[r] for r in sorted(last_seen)])
        if est.shape[0] < 2:
            continue  # dispersion metrics need at least two replicates
        for j, name in enumerate(names):
            row = metrics_row(est[:, j], truth[j])
            metric_rows.append(
                [k, name, row["n"], row["bias"], row["sd"], row["rmse"]]
            )

    return {
        "trace_lines": trace_lines,
        "estimate_rows": estimate_rows,
        "metric_rows": metric_rows,
        "train_sample_rows": train_sample_rows,
        "boot_sample_rows": boot_sample_rows,
        "timings": timings,
        "converged_all": converged_all,
        "network": None,
    }


def _run_replication_preset(cfg: dict, out_dir: str) -> dict:
    rep_cfg = cfg["replication"]
    model = build_model(cfg["model"]["family"], cfg["model"])
    net_spec = NetworkSpec.from_dict(cfg["net"])
    train_cfg = TrainConfig.from_dict(cfg["train"])
    truth = np.asarray(cfg["truth_theta"], dtype=np.float64)
    names = cfg["param_names"]
    master = RngStream(int(cfg["seed"]))
    timings: dict = {}

    # One pre-trained network for the whole study.
    t0 = time.perf_counter()
    bounds = ParamBounds.from_dict(rep_cfg["train_bounds"])
    theta_train = sample_prior(bounds, int(rep_cfg["n_train"]), master.child("train-prior"))
    x_train = simulate_rows(model, theta_train, master.child("train-sim"), train=True)
    seed = int(master.child("train-seed").stream & 0x7FFFFFFF)
    train_cfg = TrainConfig.from_dict({**cfg["train"], "seed": seed})
    net = train(net_spec, x_train, theta_train, train_cfg)
    timings["train"] = time.perf_counter() - t0

    alphas = tuple(rep_cfg.get("interval_alphas", (0.025, 0.975)))
    t_train = int(rep_cfg["t_train"])
    trace_lines: list[str] = []
    estimate_rows: list[list] = []
    boot_sample_rows: list[list] = []
    estimates_by_t: dict = {}
    t_start = time.perf_counter()

    for rep in range(int(cfg["replicates"])):
        rep_rng = master.child("rep", rep)
        for t_obs in rep_cfg["t_list"]:
            t_obs = int(t_obs)
            cell_rng = rep_rng.child("t", t_obs)
            obs_model = build_model(
                cfg["model"]["family"], {**cfg["model"], "t": t_obs}
            )
            x0 = obs_model.simulate(truth, cell_rng.child("data"))
            theta_hat, summary, plan = estimate_any(
                x0, net, t_train, cell_rng.child("est"), model,
                int(rep_cfg["b"]), alphas=alphas,
            )
            trace_lines.append(canonical_json({
                "replicate": rep,
                "t": t_obs,
                "theta_hat": theta_hat.tolist(),
                "summary": summary.stats_dict(),
                "plan": plan.to_dict(),
            }))
            med = summary.median
            estimates_by_t.setdefault(t_obs, {})[rep] = med
            for j, name in enumerate(names):
                estimate_rows.append([
                    rep, t_obs, name,
                    float(med[j]), float(theta_hat[j]), float(summary.sd[j]),
                    float(summary.interval_lo[j]), float(summary.interval_hi[j]),
                    float(summary.rescale), True,
                ])
            if cfg.get("dump_samples", True):
                for j, name in enumerate(names):
                    boot_sample_rows.extend(
                        [rep, t_obs, name, float(v)]
                        for v in summary.samples[:, j]
                    )
    timings["estimate"] = time.perf_counter() - t_start

    metric_rows: list[list] = []
    for t_obs in sorted(estimates_by_t):
        est = np.array([estimates_by_t[t_obs][r] for r in sorted(estimates_by_t[t_obs])])
        for j, name in enumerate(names):
            if est.shape[0] >= 2:
                row = metrics_row(est[:, j], truth[j])
                metric_rows.append(
                    [t_obs, name, row["n"], row["bias"], row["sd"], row["rmse"]]
                )

    return {
        "trace_lines": trace_lines,
        "estimate_rows": estimate_rows,
        "metric_rows": metric_rows,
        "train_sample_rows": [],
        "boot_sample_rows": boot_sample_rows,
        "timings": timings,
        "converged_all": True,
        "network": net,
    }


def run_experiment(cfg: dict, out_dir: str) -> dict:
    """Execute a validated config and persist the result bundle."""
    validate_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    digest = config_hash(cfg)
    meta = {"config_hash": digest}

    if cfg["mode"] == "sequential":
        bundle = _run_sequential_preset(cfg, out_dir)
    else:
        bundle = _run_replication_preset(cfg, out_dir)

    write_json(os.path.join(out_dir, "config.json"), {**cfg, "config_hash": digest})
    with open(os.path.join(out_dir, "trace.ndjson"), "w", encoding="utf-8", newline="\n") as fh:
        for line in bundle["trace_lines"]:
            fh.write(line + "\n")
    write_csv(
        os.path.join(out_dir, "estimates.csv"),
        ESTIMATE_COLUMNS, bundle["estimate_rows"], meta,
    )
    write_csv(
        os.path.join(out_dir, "metrics.csv"),
        METRIC_COLUMNS, bundle["metric_rows"], meta,
    )
    if cfg.get("dump_samples", True):
        if bundle["train_sample_rows"]:
            write_csv(
                os.path.join(out_dir, "samples", "train_theta.csv"),
                SAMPLE_COLUMNS, bundle["train_sample_rows"], meta,
            )
        if bundle["boot_sample_rows"]:
            write_csv(
                os.path.join(out_dir, "samples", "bootstrap.csv"),
                SAMPLE_COLUMNS, bundle["boot_sample_rows"], meta,
            )
    if bundle["network"] is not None:
        save_network(bundle["network"], os.path.join(out_dir, "network.json"))
    write_json(os.path.join(out_dir, "timings.json"), bundle["timings"])
    return bundle


def load_run(out_dir: str):
    """Read back (config, estimates rows, metrics rows) from a run dir."""
    from .fileio import read_csv, read_json

    cfg = read_json(os.path.join(out_dir, "config.json"))
    est_cols, est_rows, _ = read_csv(os.path.join(out_dir, "estimates.csv"))
    met_cols, met_rows, _ = read_csv(os.path.join(out_dir, "metrics.csv"))
    return cfg, (est_cols, est_rows), (met_cols, met_rows)


def recompute_metrics(out_dir: str) -> list[list]:
    """Metric rows recomputed from the persisted raw estimates.

    Sequential groups are iterations with converged replicates carried
    forward; replication groups are observed lengths. Matches metrics.csv
    exactly when the run directory is intact.
    """
    cfg, (est_cols, est_rows), _ = load_run(out_dir)
    truth = {n: v for n, v in zip(cfg["param_names"], cfg["truth_theta"])}
    i_rep = est_cols.index("replicate")
    i_grp = est_cols.index("group")
    i_par = est_cols.index("parameter")
    i_est = est_cols.index("estimate")

    by_group: dict = {}
    for row in est_rows:
        grp = int(row[i_grp])
        by_group.setdefault(grp, {}).setdefault(row[i_par], {})[int(row[i_rep])] = float(row[i_est])

    metric_rows: list[list] = []
    last_seen: dict = {}
    carry = cfg["mode"] == "sequential"
    for grp in sorted(by_group):
        for par in cfg["param_names"]:
            cell = by_group[grp].get(par, {})
            if carry:
                last_seen.setdefault(par, {}).update(cell)
                cell = last_seen[par]
            values = np.array([cell[r] for r in sorted(cell)])
            if values.size >= 2:
                row = metrics_row(values, truth[par])
                metric_rows.append(
                    [grp, par, row["n"], row["bias"], row["sd"], row["rmse"]]
                )
    return metric_rows
