"""Plot-data emission and figure rendering for finished runs.

Emits one tidy CSV per figure family, all with the same five columns
(replicate, iteration, parameter, role, value); the iteration column
holds the observed length T for replication presets. Families:

    boxplots.csv   roles train / bootstrap / fitted / truth, one block per
                   (replicate, iteration); drives iteration-progress boxplots
    scatter.csv    roles fitted / truth at each replicate's final cell
    intervals.csv  roles interval_lo / interval_hi / fitted / truth

Figures are rendered alongside the CSVs (PNG, Agg backend) unless
disabled; missing sample dumps simply skip the boxplot family.
"""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .fileio import read_csv, read_json, write_csv

__all__ = ["emit_plotdata", "render_figures"]

PLOT_COLUMNS = ["replicate", "iteration", "parameter", "role", "value"]


def _read_trace(run_dir: str) -> list[dict]:
    path = os.path.join(run_dir, "trace.ndjson")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _read_samples(run_dir: str, name: str):
    path = os.path.join(run_dir, "samples", name)
    if not os.path.exists(path):
        return None
    cols, rows, _ = read_csv(path)
    i_rep, i_grp = cols.index("replicate"), cols.index("group")
    i_par, i_val = cols.index("parameter"), cols.index("value")
    out: dict = {}
    for row in rows:
        key = (int(row[i_rep]), int(row[i_grp]), row[i_par])
        out.setdefault(key, []).append(float(row[i_val]))
    return out


def emit_plotdata(run_dir: str, out_subdir: str = "plotdata") -> list[str]:
    """Write the figure-family CSVs for a finished run; returns the paths."""
    cfg = read_json(os.path.join(run_dir, "config.json"))
    meta = {"config_hash": cfg.get("config_hash", "")}
    if cfg["mode"] == "replication":
        meta["iteration_column"] = "observed length T"
    names = cfg["param_names"]
    truth = dict(zip(names, cfg["truth_theta"]))
    trace = _read_trace(run_dir)
    out_dir = os.path.join(run_dir, out_subdir)
    written: list[str] = []

    is_seq = cfg["mode"] == "sequential"
    group_key = "iteration" if is_seq else "t"

    # boxplots: raw training targets + bootstrap draws per cell
    train_samples = _read_samples(run_dir, "train_theta.csv")
    boot_samples = _read_samples(run_dir, "bootstrap.csv")
    if is_seq and train_samples and boot_samples:
        rows = []
        for rec in trace:
            rep, grp = rec["replicate"], rec[group_key]
            for j, par in enumerate(names):
                for v in train_samples.get((rep, grp, par), []):
                    rows.append([rep, grp, par, "train", v])
                for v in boot_samples.get((rep, grp, par), []):
                    rows.append([rep, grp, par, "bootstrap", v])
                rows.append([rep, grp, par, "fitted", float(rec["theta_hat"][j])])
                rows.append([rep, grp, par, "truth", truth[par]])
        path = os.path.join(out_dir, "boxplots.csv")
        write_csv(path, PLOT_COLUMNS, rows, meta)
        written.append(path)

    # scatter: each replicate's final cell
    final: dict = {}
    for rec in trace:
        final[(rec["replicate"], rec[group_key])] = rec
    last_group: dict = {}
    for rep, grp in final:
        last_group[rep] = max(grp, last_group.get(rep, grp))
    rows = []
    for rec in trace:
        rep, grp = rec["replicate"], rec[group_key]
        med = rec["summary"]["median"]
        if is_seq and grp != last_group[rep]:
            continue
        for j, par in enumerate(names):
            rows.append([rep, grp, par, "fitted", float(med[j])])
            rows.append([rep, grp, par, "truth", truth[par]])
    path = os.path.join(out_dir, "scatter.csv")
    write_csv(path, PLOT_COLUMNS, rows, meta)
    written.append(path)

    # intervals: every cell's central interval around the median
    rows = []
    for rec in trace:
        rep, grp = rec["replicate"], rec[group_key]
        s = rec["summary"]
        for j, par in enumerate(names):
            rows.append([rep, grp, par, "interval_lo", float(s["interval_lo"][j])])
            rows.append([rep, grp, par, "interval_hi", float(s["interval_hi"][j])])
            rows.append([rep, grp, par, "fitted", float(s["median"][j])])
            rows.append([rep, grp, par, "truth", truth[par]])
    path = os.path.join(out_dir, "intervals.csv")
    write_csv(path, PLOT_COLUMNS, rows, meta)
    written.append(path)
    return written


def _load_family(run_dir, out_subdir, name):
    path = os.path.join(run_dir, out_subdir, name)
    if not os.path.exists(path):
        return None
    cols, rows, _ = read_csv(path)
    idx = {c: cols.index(c) for c in PLOT_COLUMNS}
    parsed = [
        {
            "replicate": int(r[idx["replicate"]]),
            "iteration": int(r[idx["iteration"]]),
            "parameter": r[idx["parameter"]],
            "role": r[idx["role"]],
            "value": float(r[idx["value"]]),
        }
        for r in rows
    ]
    return parsed


def _fig_path(run_dir, out_subdir, name):
    return os.path.join(run_dir, out_subdir, name)


def render_figures(run_dir: str, out_subdir: str = "plotdata") -> list[str]:
    """Render PNGs from the emitted plot-data CSVs."""
    cfg = read_json(os.path.join(run_dir, "config.json"))
    names = cfg["param_names"]
    truth = dict(zip(names, cfg["truth_theta"]))
    written: list[str] = []

    box = _load_family(run_dir, out_subdir, "boxplots.csv")
    if box:
        rep0 = min(r["replicate"] for r in box)
        for par in names:
            rows = [r for r in box if r["parameter"] == par and r["replicate"] == rep0]
            iters = sorted({r["iteration"] for r in rows})
            train = [
                [r["value"] for r in rows if r["iteration"] == k and r["role"] == "train"]
                for k in iters
            ]
            boot = [
                [r["value"] for r in rows if r["iteration"] == k and r["role"] == "bootstrap"]
                for k in iters
            ]
            fitted = [
                next(r["value"] for r in rows if r["iteration"] == k and r["role"] == "fitted")
                for k in iters
            ]
            fig, ax = plt.subplots(figsize=(6, 4))
            pos = np.arange(len(iters), dtype=float)
            bp1 = ax.boxplot(
                train, positions=pos - 0.18, widths=0.3, patch_artist=True,
                showfliers=False,
            )
            for patch in bp1["boxes"]:
                patch.set_facecolor("lightgray")
            bp2 = ax.boxplot(
                boot, positions=pos + 0.18, widths=0.3, patch_artist=True,
                showfliers=False,
            )
            for patch in bp2["boxes"]:
                patch.set_facecolor("lightblue")
            ax.plot(pos, fitted, "r-o", ms=4, label="fitted")
            ax.axhline(truth[par], color="green", ls="--", label="truth")
            ax.set_xticks(pos)
            ax.set_xticklabels([str(k) for k in iters])
            ax.set_xlabel("iteration")
            ax.set_ylabel(par)
            ax.legend(fontsize=8)
            fig.tight_layout()
            path = _fig_path(run_dir, out_subdir, f"boxplots_{par}.png")
            fig.savefig(path, dpi=150)
            plt.close(fig)
            written.append(path)

    scatter = _load_family(run_dir, out_subdir, "scatter.csv")
    if scatter:
        fig, ax = plt.subplots(figsize=(5, 4.5))
        if len(names) >= 2:
            p1, p2 = names[0], names[1]
            reps = sorted({r["replicate"] for r in scatter})
            xs, ys = [], []
            for rep in reps:
                sub = [r for r in scatter if r["replicate"] == rep and r["role"] == "fitted"]
                for k in sorted({r["iteration"] for r in sub}):
                    vals = {r["parameter"]: r["value"] for r in sub if r["iteration"] == k}
                    if p1 in vals and p2 in vals:
                        xs.append(vals[p1])
                        ys.append(vals[p2])
            ax.scatter(xs, ys, s=14, color="seagreen", alpha=0.75, label="estimates")
            ax.plot([truth[p1]], [truth[p2]], "kx", ms=10, mew=2, label="truth")
            ax.set_xlabel(p1)
            ax.set_ylabel(p2)
        else:
            par = names[0]
            pts = [r for r in scatter if r["role"] == "fitted" and r["parameter"] == par]
            ax.scatter(
                [r["replicate"] for r in pts], [r["value"] for r in pts],
                s=14, color="seagreen", label="estimates",
            )
            ax.axhline(truth[par], color="green", ls="--", label="truth")
            ax.set_xlabel("replicate")
            ax.set_ylabel(par)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = _fig_path(run_dir, out_subdir, "scatter.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    intervals = _load_family(run_dir, out_subdir, "intervals.csv")
    if intervals:
        rep0 = min(r["replicate"] for r in intervals)
        for par in names:
            rows = [
                r for r in intervals
                if r["parameter"] == par and r["replicate"] == rep0
            ]
            groups = sorted({r["iteration"] for r in rows})
            med, lo, hi = [], [], []
            for g in groups:
                cell = {r["role"]: r["value"] for r in rows if r["iteration"] == g}
                med.append(cell["fitted"])
                lo.append(cell["fitted"] - cell["interval_lo"])
                hi.append(cell["interval_hi"] - cell["fitted"])
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.errorbar(
                range(len(groups)), med, yerr=[lo, hi],
                fmt="o", color="steelblue", capsize=4, label="95% interval",
            )
            ax.axhline(truth[par], color="gray", ls="--", label="truth")
            ax.set_xticks(range(len(groups)))
            ax.set_xticklabels([str(g) for g in groups])
            ax.set_xlabel(
                "iteration" if cfg["mode"] == "sequential" else "observed length T"
            )
            ax.set_ylabel(par)
            ax.legend(fontsize=8)
            fig.tight_layout()
            path = _fig_path(run_dir, out_subdir, f"intervals_{par}.png")
            fig.savefig(path, dpi=150)
            plt.close(fig)
            written.append(path)

    return written
