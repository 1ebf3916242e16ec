"""Experiment presets and config handling.

Each preset captures one study at three scales: ``smoke`` (seconds, for
determinism checks), ``small`` (desk scale, minutes) and ``paper`` (the
published constants; the spatial preset gets expensive here).

A config is a plain JSON-able dict so that ``parse(emit(cfg)) == cfg``
holds trivially; ``--set dotted.key=value`` overrides individual leaves.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math

from .errors import ConfigError
from .fileio import canonical_json
from .transforms import get_transform, logit2

__all__ = [
    "PRESETS",
    "SCALES",
    "preset_config",
    "apply_overrides",
    "config_hash",
    "validate_config",
]

PRESETS = (
    "gauss-var",
    "gauss-meanvar",
    "gauss-moments",
    "brown-resnick",
    "svol",
    "ar1-replication",
)
SCALES = ("smoke", "small", "paper")

F1_08 = math.log(9.0)  # fisher transform of 0.8
F2_6 = math.log(4.0)  # log-shift-2 transform of 6
F1_09 = math.log(19.0)  # fisher transform of 0.9


def _mlp_net(j: int, p: int, hidden: int = 50) -> dict:
    return {
        "input_shape": [j],
        "layers": [
            {"kind": "dense", "units": hidden},
            {"kind": "relu"},
            {"kind": "dense", "units": p},
        ],
    }


def _cnn2d_net(nx: int, ny: int, p: int) -> dict:
    # Sub-sampling after the first activation keeps the flatten->dense
    # stage small enough to generalize from a few thousand fields.
    return {
        "input_shape": [nx, ny, 1],
        "layers": [
            {"kind": "conv2d", "filters": 16, "kernel": [3, 3]},
            {"kind": "relu"},
            {"kind": "avgpool2d", "kernel": [2, 2]},
            {"kind": "conv2d", "filters": 8, "kernel": [3, 3]},
            {"kind": "relu"},
            {"kind": "flatten"},
            {"kind": "dense", "units": 4},
            {"kind": "dense", "units": p},
        ],
    }


def _cnn1d_net(t: int, p: int) -> dict:
    return {
        "input_shape": [t, 1],
        "layers": [
            {"kind": "conv1d", "filters": 4, "kernel": 3},
            {"kind": "relu"},
            {"kind": "avgpool1d", "kernel": 2},
            {"kind": "conv1d", "filters": 4, "kernel": 3},
            {"kind": "relu"},
            {"kind": "avgpool1d", "kernel": 2},
            {"kind": "conv1d", "filters": 4, "kernel": 3},
            {"kind": "relu"},
            {"kind": "avgpool1d", "kernel": 2},
            {"kind": "flatten"},
            {"kind": "dense", "units": 4},
            {"kind": "dense", "units": p},
        ],
    }


def _train_cfg(epochs: int, batch: int, lr: float = 0.01) -> dict:
    return {
        "learning_rate": lr,
        "epochs": epochs,
        "batch_size": batch,
        "betas": [0.9, 0.999],
        "epsilon": 1e-8,
        "seed": 0,
    }


def _sequential_block(n0, b, bounds0, *, gamma=0.3, max_iterations=20,
                      grow_n=False, replay_fraction=0.0):
    return {
        "n0": n0,
        "b": b,
        "gamma": gamma,
        "max_iterations": max_iterations,
        "grow_n": grow_n,
        "replay_fraction": replay_fraction,
        "bounds_rule": "basic-bootstrap",
        "interval_alphas": [0.025, 0.975],
        "bounds0": bounds0,
    }


def _gauss_var(scale: str) -> dict:
    j = 20
    n0, b, reps, epochs, max_it = {
        "smoke": (150, 60, 2, 5, 2),
        "small": (2000, 2000, 20, 60, 20),
        "paper": (10000, 10000, 10, 60, 20),
    }[scale]
    return {
        "mode": "sequential",
        "param_names": ["log_var"],
        "transforms": ["log"],
        "truth": {"mu": 1.0, "log_var": 1.0},
        "truth_theta": [1.0],
        "replicates": reps,
        "model": {"family": "gauss-var", "j": j, "mu": 1.0, "sort": True},
        "net": _mlp_net(j, 1),
        "train": _train_cfg(epochs, 100, lr=0.005),
        "sequential": _sequential_block(
            n0, b, {"lower": [-2.0], "upper": [1.0]},
            grow_n=True, replay_fraction=1.0, max_iterations=max_it,
        ),
    }


def _gauss_meanvar(scale: str) -> dict:
    j = 20
    n0, b, reps, epochs, max_it = {
        "smoke": (150, 60, 2, 5, 2),
        "small": (2000, 1000, 20, 60, 20),
        "paper": (10000, 10000, 10, 60, 20),
    }[scale]
    return {
        "mode": "sequential",
        "param_names": ["mean", "log_var"],
        "transforms": ["identity", "log"],
        "truth": {"mu": 1.0, "log_var": 1.0},
        "truth_theta": [1.0, 1.0],
        "replicates": reps,
        "model": {"family": "gauss-meanvar", "j": j, "sort": True},
        "net": _mlp_net(j, 2),
        "train": _train_cfg(epochs, 100, lr=0.005),
        "sequential": _sequential_block(
            n0, b, {"lower": [-0.5, -2.0], "upper": [0.5, 1.0]},
            grow_n=True, replay_fraction=1.0, max_iterations=max_it,
        ),
    }


def _gauss_moments(scale: str) -> dict:
    j = 20
    n0, b, reps, epochs, max_it = {
        "smoke": (150, 60, 2, 5, 2),
        "small": (1000, 1000, 20, 60, 20),
        "paper": (10000, 10000, 10, 60, 20),
    }[scale]
    # Second-moment box: 0.25 + exp(-2) up to 0.25 + e; on the log scale
    # for the transformed run, the same numbers raw for the raw run.
    lo2 = 0.25 + math.exp(-2.0)
    hi2 = 0.25 + math.e
    return {
        "mode": "sequential",
        "param_names": ["m1", "m2"],
        "transforms": ["identity", "moment"],
        "truth": {"mu": 1.0, "log_var": 1.0},
        "truth_theta": [1.0, math.log(1.0 + math.e)],
        "replicates": reps,
        "model": {"family": "gauss-moments", "j": j, "raw": False, "sort": True},
        "net": _mlp_net(j, 2),
        "train": _train_cfg(epochs, 100, lr=0.005),
        "sequential": _sequential_block(
            n0, b, {"lower": [-0.5, lo2], "upper": [0.5, hi2]},
            grow_n=True, replay_fraction=1.0, max_iterations=max_it,
        ),
    }


def _brown_resnick(scale: str) -> dict:
    nx, n0, b, reps, epochs, max_it = {
        "smoke": (8, 80, 40, 2, 4, 2),
        "small": (16, 1500, 400, 20, 30, 5),
        "paper": (30, 6000, 1000, 100, 30, 10),
    }[scale]
    return {
        "mode": "sequential",
        "param_names": ["log_range", "logit2_smoothness"],
        "transforms": ["log", "logit2"],
        "truth": {"range": 6.2, "smoothness": 1.0},
        "truth_theta": [math.log(6.2), 0.0],
        "replicates": reps,
        "model": {
            "family": "brown-resnick",
            "grid": {"nx": nx, "ny": nx, "spacing": 1.0},
            "log_data": True,
        },
        "net": _cnn2d_net(nx, nx, 2),
        "train": _train_cfg(epochs, 100),
        "sequential": {
            **_sequential_block(
                n0, b, None, replay_fraction=0.4, max_iterations=max_it
            ),
            # range bounds come from a powered-exponential variogram fit to
            # the observed field: log(alpha-hat) +- halfwidth
            "init": {
                "range_log_halfwidth": 2.0,
                "smoothness_bounds": [logit2(0.1), logit2(1.9)],
            },
        },
    }


def _svol(scale: str) -> dict:
    t_train, t_list, n, b, reps, epochs = {
        "smoke": (100, [50, 100], 100, 50, 2, 4),
        "small": (1000, [250, 500, 1000], 2000, 1000, 10, 30),
        "paper": (5000, [500, 1000, 2000, 3000, 4000, 5000], 10000, 10000, 30, 30),
    }[scale]
    c = 2.0
    return {
        "mode": "replication",
        "param_names": ["f1_rho", "f2_nu"],
        "transforms": ["fisher", "log-shift-2"],
        "truth": {"rho": 0.8, "nu": 6.0, "sigma": 0.1},
        "truth_theta": [F1_08, F2_6],
        "replicates": reps,
        "model": {"family": "svol", "t": t_train, "scaled": True},
        "net": _cnn1d_net(t_train, 2),
        "train": _train_cfg(epochs, 50),
        "replication": {
            "t_train": t_train,
            "t_list": t_list,
            "n_train": n,
            "b": b,
            "interval_alphas": [0.025, 0.975],
            "train_bounds": {
                "lower": [F1_08 - c, F2_6 - c],
                "upper": [F1_08 + c, F2_6 + c],
            },
        },
    }


def _ar1_replication(scale: str) -> dict:
    t_train, t_list, n, b, reps, epochs = {
        "smoke": (60, [20], 80, 40, 2, 4),
        "small": (500, [100], 1000, 500, 10, 30),
        "paper": (250, [50], 4000, 2000, 30, 30),
    }[scale]
    c = 2.0
    return {
        "mode": "replication",
        "param_names": ["f1_rho"],
        "transforms": ["fisher"],
        "truth": {"rho": 0.9},
        "truth_theta": [F1_09],
        "replicates": reps,
        "model": {"family": "ar1", "t": t_train},
        "net": _cnn1d_net(t_train, 1),
        "train": _train_cfg(epochs, 50),
        "replication": {
            "t_train": t_train,
            "t_list": t_list,
            "n_train": n,
            "b": b,
            "interval_alphas": [0.025, 0.975],
            "train_bounds": {"lower": [F1_09 - c], "upper": [F1_09 + c]},
        },
    }


_BUILDERS = {
    "gauss-var": _gauss_var,
    "gauss-meanvar": _gauss_meanvar,
    "gauss-moments": _gauss_moments,
    "brown-resnick": _brown_resnick,
    "svol": _svol,
    "ar1-replication": _ar1_replication,
}


def preset_config(preset: str, scale: str = "small", seed: int = 1) -> dict:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; known: {list(PRESETS)}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; known: {list(SCALES)}")
    cfg = {
        "preset": preset,
        "scale": scale,
        "seed": int(seed),
        "dump_samples": True,
        **_BUILDERS[preset](scale),
    }
    return cfg


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, pairs: list[str]) -> dict:
    """Apply ``dotted.path=value`` overrides; values parse as JSON first."""
    out = copy.deepcopy(cfg)
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"unknown config path {key!r}")
            node = node[part]
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ConfigError(f"unknown config path {key!r}")
        node[leaf] = _parse_value(raw)
    return out


def config_hash(cfg: dict) -> str:
    """Stable hash of the scientific content (out_dir excluded)."""
    content = {k: v for k, v in cfg.items() if k not in ("out_dir", "config_hash")}
    return hashlib.sha256(canonical_json(content).encode()).hexdigest()[:16]


def validate_config(cfg: dict) -> None:
    if cfg.get("preset") not in PRESETS:
        raise ConfigError(f"unknown preset {cfg.get('preset')!r}")
    if cfg.get("mode") not in ("sequential", "replication"):
        raise ConfigError(f"unknown mode {cfg.get('mode')!r}")
    if int(cfg.get("replicates", 0)) < 1:
        raise ConfigError("replicates must be >= 1")
    p = len(cfg["param_names"])
    if len(cfg["truth_theta"]) != p:
        raise ConfigError("truth_theta length must match param_names")
    for name in cfg["transforms"]:
        if name == "moment":
            continue
        try:
            get_transform(name)
        except KeyError as err:
            raise ConfigError(str(err)) from None
    if cfg["mode"] == "sequential":
        seq = cfg.get("sequential") or {}
        for key in ("n0", "b", "gamma", "max_iterations"):
            if key not in seq:
                raise ConfigError(f"sequential config missing {key!r}")
        if int(seq["n0"]) < 1 or int(seq["b"]) < 2:
            raise ConfigError("need n0 >= 1 and b >= 2")
    else:
        rep = cfg.get("replication") or {}
        for key in ("t_train", "t_list", "n_train", "b", "train_bounds"):
            if key not in rep:
                raise ConfigError(f"replication config missing {key!r}")
        if any(int(t) < 1 for t in rep["t_list"]):
            raise ConfigError("t_list entries must be positive")
