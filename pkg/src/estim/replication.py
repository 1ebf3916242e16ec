"""Length adaptation for a single pre-trained time-series network.

A network trained on series of length T_train estimates a series of any
length T: shorter series are tiled end-to-end (plus one contiguous random
remainder block), longer ones are chunked and the chunk estimates
averaged. Replication adds no information, so reported uncertainty is
rescaled by sqrt(T_train / T) relative to the bootstrap spread measured
at the network's native length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RngStream
from .errors import LengthError
from .neural import TrainedNetwork, forward
from .sequential import BootstrapSummary, SimModel, estimate, simulate_rows, summarize_bootstrap

__all__ = [
    "ReplicationPlan",
    "replicate",
    "estimate_long",
    "rescale_sd",
    "estimate_any",
]


@dataclass(frozen=True)
class ReplicationPlan:
    """How one observed series was adapted to the training length."""

    t: int  # observed length
    t_train: int  # network input length
    m: int  # whole copies laid end to end (T <= T_train)
    remainder: int  # T_train mod T
    offset: int  # start of the remainder block within the observed series
    chunks: int  # ceil(T / T_train) when T > T_train, else 1

    @property
    def rescale_factor(self) -> float:
        """sqrt(T_train / T); above 1 when the series was tiled."""
        return float(np.sqrt(self.t_train / self.t))

    def to_dict(self) -> dict:
        return {
            "t": self.t, "t_train": self.t_train, "m": self.m,
            "remainder": self.remainder, "offset": self.offset,
            "chunks": self.chunks,
        }


def replicate(x0: np.ndarray, t_train: int, rng: RngStream):
    """Tile a short series up to the training length.

    floor(T_train/T) end-to-end copies, then one contiguous block of
    length T_train mod T whose start offset is uniform on {0..T-r}.
    Returns (series of length T_train, plan).
    """
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    t = x0.size
    t_train = int(t_train)
    if t < 1:
        raise LengthError("observed series is empty")
    if t > t_train:
        raise LengthError(
            f"series length {t} exceeds training length {t_train}; chunk it instead"
        )
    m, r = divmod(t_train, t)
    offset = 0
    out = np.tile(x0, m)
    if r > 0:
        offset = int(rng.generator().integers(0, t - r + 1))
        out = np.concatenate([out, x0[offset : offset + r]])
    plan = ReplicationPlan(
        t=t, t_train=t_train, m=m, remainder=r, offset=offset, chunks=1
    )
    return out, plan


def estimate_long(
    x0: np.ndarray,
    net: TrainedNetwork,
    t_train: int,
    rng: RngStream,
    combine: str = "mean",
):
    """Estimate a series longer than the training length chunk by chunk.

    Full chunks of length T_train are pushed through the network; a short
    tail chunk is tiled first. Returns (combined estimate, per-chunk
    estimates, plan). The combination is the arithmetic mean on the
    transformed scale (median available via ``combine="median"``).
    """
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    t = x0.size
    t_train = int(t_train)
    if t <= t_train:
        raise LengthError(f"series length {t} does not exceed training length {t_train}")
    n_full, tail = divmod(t, t_train)
    chunks = [x0[i * t_train : (i + 1) * t_train] for i in range(n_full)]
    if tail:
        tail_rep, _ = replicate(x0[n_full * t_train :], t_train, rng.child("tail"))
        chunks.append(tail_rep)
    ests = forward(net, np.stack(chunks))
    if combine == "mean":
        combined = ests.mean(axis=0)
    elif combine == "median":
        combined = np.median(ests, axis=0)
    else:
        raise ValueError(f"unknown combine rule {combine!r}")
    plan = ReplicationPlan(
        t=t, t_train=t_train, m=1, remainder=0, offset=0, chunks=len(chunks)
    )
    return combined, ests, plan


def rescale_sd(sd_replicated: float, m: int) -> float:
    """Undo the variance shrinkage of an m-fold replicated series: sd * sqrt(m)."""
    if sd_replicated < 0:
        raise ValueError("sd must be nonnegative")
    if m < 1:
        raise ValueError("block count must be >= 1")
    return float(sd_replicated) * float(np.sqrt(m))


def estimate_any(
    x0: np.ndarray,
    net: TrainedNetwork,
    t_train: int,
    rng: RngStream,
    model: SimModel,
    b: int,
    alphas: tuple = (0.025, 0.975),
):
    """Point estimate plus rescaled parametric bootstrap for any length.

    The bootstrap simulates B series at the estimate, at the network's
    native length (its spread therefore reflects T_train observations),
    and the summary's sd and interval half-widths are rescaled by
    sqrt(T_train / T): inflated when the observed series was tiled,
    shrunk when chunk estimates were averaged, exactly 1 at T = T_train.

    Returns (theta_hat, BootstrapSummary, ReplicationPlan).
    """
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    t = x0.size
    if t <= int(t_train):
        x_rep, plan = replicate(x0, t_train, rng.child("plan"))
        theta_hat = estimate(net, x_rep)
    else:
        theta_hat, _, plan = estimate_long(x0, net, t_train, rng.child("plan"))
    factor = plan.rescale_factor

    xb = simulate_rows(model, np.tile(theta_hat, (int(b), 1)), rng.child("boot"))
    samples = forward(net, xb)
    summary = summarize_bootstrap(samples, theta_hat, alphas=alphas, rescale=factor)
    return theta_hat, summary, plan
