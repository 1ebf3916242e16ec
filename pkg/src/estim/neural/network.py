"""Network assembly: specs, forward/backward over the stack, JSON io."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from .layers import LayerSpec, backward_one, forward_one, infer_output_shape

__all__ = [
    "NetworkSpec",
    "TrainedNetwork",
    "forward",
    "backprop",
    "mse_loss",
    "save_network",
    "load_network",
    "loads_network",
    "dumps_network",
]


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer stack mapping input_shape to an output vector of dim P."""

    input_shape: tuple
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        shape = self.input_shape
        for spec in self.layers:
            shape = infer_output_shape(spec, shape)
        if len(shape) != 1:
            raise ShapeMismatch(
                f"network must end in a flat output, final shape is {shape}"
            )
        object.__setattr__(self, "_output_dim", int(shape[0]))

    @property
    def output_dim(self) -> int:
        return self._output_dim

    def layer_input_shapes(self) -> list[tuple]:
        shapes = [self.input_shape]
        for spec in self.layers:
            shapes.append(infer_output_shape(spec, shapes[-1]))
        return shapes[:-1]

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "layers": [s.to_dict() for s in self.layers],
        }

    @staticmethod
    def from_dict(d: dict) -> "NetworkSpec":
        return NetworkSpec(
            input_shape=tuple(d["input_shape"]),
            layers=tuple(LayerSpec.from_dict(ld) for ld in d["layers"]),
        )


@dataclass
class TrainedNetwork:
    """Immutable-by-convention container: spec + weight tensors + loss curve.

    ``weights`` is a flat list in layer order; parameterless layers
    contribute nothing. Safe to share across threads once built.
    """

    spec: NetworkSpec
    weights: list = field(default_factory=list)
    loss_history: list = field(default_factory=list)


def _group_weights(spec: NetworkSpec, weights: list) -> list[list]:
    """Split the flat weight list into per-layer chunks."""
    out, i = [], 0
    for layer in spec.layers:
        n = 0 if layer.kind in ("relu", "flatten", "avgpool1d", "avgpool2d") else 2
        out.append(weights[i : i + n])
        i += n
    if i != len(weights):
        raise ShapeMismatch(
            f"weight list has {len(weights)} tensors, spec needs {i}"
        )
    return out


def _as_batch(spec: NetworkSpec, batch: np.ndarray) -> np.ndarray:
    """Coerce (n, total) or (n, *input_shape) to (n, *input_shape)."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    want = spec.input_shape
    if x.shape[1:] == want:
        return x
    total = int(np.prod(want))
    if x.ndim == 2 and x.shape[1] == total:
        return x.reshape(x.shape[0], *want)
    raise ShapeMismatch(
        f"batch shape {x.shape[1:]} incompatible with input shape {want}"
    )


def _forward_cached(spec: NetworkSpec, weights: list, batch: np.ndarray):
    x = _as_batch(spec, batch)
    grouped = _group_weights(spec, weights)
    caches = []
    for layer, w in zip(spec.layers, grouped):
        x, cache = forward_one(layer, w, x)
        caches.append(cache)
    return x, caches, grouped


def forward(net: TrainedNetwork, batch: np.ndarray) -> np.ndarray:
    """Predictions, shape (n, P). Row i depends only on input row i."""
    out, _, _ = _forward_cached(net.spec, net.weights, batch)
    return out


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over every entry (batch rows and P outputs) of squared error."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def backprop(net: TrainedNetwork, batch: np.ndarray, targets: np.ndarray):
    """Gradients of batch-mean MSE w.r.t. every weight tensor.

    Returns (loss, [grad per weight tensor in the same flat order]).
    """
    spec = net.spec
    out, caches, grouped = _forward_cached(spec, net.weights, batch)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    if out.shape != targets.shape:
        raise ShapeMismatch(f"predictions {out.shape} vs targets {targets.shape}")
    diff = out - targets
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    grads_flat: list[np.ndarray] = []
    for layer, w, cache in zip(
        reversed(spec.layers), reversed(grouped), reversed(caches)
    ):
        grad, w_grads = backward_one(layer, w, cache, grad)
        grads_flat[:0] = w_grads
    return loss, grads_flat


def dumps_network(net: TrainedNetwork) -> str:
    """JSON text for a trained network; round-trips bit-exactly."""
    doc = {
        "spec": net.spec.to_dict(),
        "weights": [
            {"shape": list(w.shape), "data": w.ravel().tolist()} for w in net.weights
        ],
        "loss_history": [float(v) for v in net.loss_history],
    }
    return json.dumps(doc)


def loads_network(text: str) -> TrainedNetwork:
    doc = json.loads(text)
    spec = NetworkSpec.from_dict(doc["spec"])
    weights = [
        np.array(w["data"], dtype=np.float64).reshape(w["shape"])
        for w in doc["weights"]
    ]
    return TrainedNetwork(spec=spec, weights=weights, loss_history=doc["loss_history"])


def save_network(net: TrainedNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_network(net))


def load_network(path) -> TrainedNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_network(fh.read())
