"""Adam training loop. Deterministic given the config seed."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..core import RngStream
from ..errors import NonFiniteLoss, ShapeMismatch
from .layers import init_weights
from .network import NetworkSpec, TrainedNetwork, backprop

__all__ = ["TrainConfig", "train", "initialize"]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 30
    batch_size: int = 100
    betas: tuple = (0.9, 0.999)
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "betas": list(self.betas),
            "epsilon": self.epsilon,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return TrainConfig(**d)


def initialize(spec: NetworkSpec, seed: int) -> TrainedNetwork:
    """Fresh network with fan-scaled uniform weights and zero biases."""
    rng = RngStream(seed, 0).child("weight-init").generator()
    weights = []
    for layer, in_shape in zip(spec.layers, spec.layer_input_shapes()):
        weights.extend(init_weights(layer, in_shape, rng))
    return TrainedNetwork(spec=spec, weights=weights, loss_history=[])


def train(
    spec: NetworkSpec,
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    warm_start: TrainedNetwork | None = None,
) -> TrainedNetwork:
    """Adam over shuffled mini-batches for cfg.epochs.

    ``inputs`` is (n, ...) matching the spec's input shape (flat rows are
    reshaped); ``targets`` is (n, P). The loss history holds one mean MSE
    per epoch (batch losses weighted by batch size). Divergence raises
    :class:`NonFiniteLoss` with the offending epoch. Deterministic given
    cfg.seed: init and shuffling derive from it.
    """
    x = np.asarray(inputs, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    n = x.shape[0]
    if n == 0:
        raise ShapeMismatch("training set is empty")
    if t.shape[0] != n:
        raise ShapeMismatch(f"{n} inputs vs {t.shape[0]} targets")
    if t.shape[1] != spec.output_dim:
        raise ShapeMismatch(
            f"targets have dim {t.shape[1]}, network outputs {spec.output_dim}"
        )
    batch = min(cfg.batch_size, n)

    if warm_start is not None:
        net = TrainedNetwork(
            spec=spec, weights=[w.copy() for w in warm_start.weights], loss_history=[]
        )
    else:
        net = initialize(spec, cfg.seed)

    beta1, beta2 = cfg.betas
    m = [np.zeros_like(w) for w in net.weights]
    v = [np.zeros_like(w) for w in net.weights]
    step = 0
    shuffle_rng = RngStream(cfg.seed, 0).child("shuffle").generator()

    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total, count = 0.0, 0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            loss, grads = backprop(net, x[idx], t[idx])
            total += loss * idx.size
            count += idx.size
            step += 1
            for j, g in enumerate(grads):
                m[j] = beta1 * m[j] + (1 - beta1) * g
                v[j] = beta2 * v[j] + (1 - beta2) * (g * g)
                m_hat = m[j] / (1 - beta1**step)
                v_hat = v[j] / (1 - beta2**step)
                net.weights[j] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        epoch_loss = total / count
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss(
                f"training loss diverged at epoch {epoch}", epoch=epoch
            )
        history.append(epoch_loss)

    net.loss_history = history
    return net


def retrain_reduced_lr(
    spec: NetworkSpec, inputs, targets, cfg: TrainConfig
) -> TrainedNetwork:
    """One retry at lr/10 after divergence; re-raises on a second failure."""
    return train(spec, inputs, targets, replace(cfg, learning_rate=cfg.learning_rate / 10.0))
