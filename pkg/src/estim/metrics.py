"""Bias / sd / RMSE tables over replicate estimates."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInput

__all__ = ["metrics_row", "metrics_table"]


def metrics_row(estimates: np.ndarray, truth: float) -> dict:
    """bias = mean - truth, sd with n-1 denominator, rmse vs truth."""
    est = np.asarray(estimates, dtype=np.float64).ravel()
    if est.size < 2:
        raise DegenerateInput(f"need at least 2 estimates, got {est.size}")
    err = est - float(truth)
    return {
        "n": int(est.size),
        "bias": float(np.mean(err)),
        "sd": float(np.std(est, ddof=1)),
        "rmse": float(np.sqrt(np.mean(err * err))),
    }


def metrics_table(estimates: np.ndarray, truth, param_names=None) -> list[dict]:
    """Per-coordinate metric rows for an (I, P) estimate matrix.

    Point estimates should already be the bootstrap medians when bootstrap
    summaries are available; this function only aggregates.
    """
    est = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
    truth = np.atleast_1d(np.asarray(truth, dtype=np.float64))
    if est.shape[1] != truth.size:
        raise DegenerateInput(
            f"estimates have {est.shape[1]} columns, truth has {truth.size}"
        )
    names = param_names or [f"theta{j + 1}" for j in range(truth.size)]
    rows = []
    for j in range(truth.size):
        row = {"parameter": names[j], **metrics_row(est[:, j], truth[j])}
        rows.append(row)
    return rows
