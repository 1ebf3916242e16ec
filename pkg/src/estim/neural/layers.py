"""Layer math: forward and backward passes for the supported layer kinds.

Dense, valid-mode stride-1 convolutions (1-d and 2-d), ReLU and flatten.
Convolutions use sliding windows + einsum so everything stays in float64
BLAS calls; no padding, no pooling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch

__all__ = [
    "LayerSpec",
    "dense",
    "conv1d",
    "conv2d",
    "relu",
    "flatten",
    "avgpool1d",
    "avgpool2d",
    "KINDS",
]

KINDS = ("dense", "conv1d", "conv2d", "relu", "flatten", "avgpool1d", "avgpool2d")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a network stack.

    kind     dense | conv1d | conv2d | relu | flatten | avgpool1d | avgpool2d
    units    output width (dense only)
    filters  output channels (conv only)
    kernel   tap count (conv1d), (kh, kw) pair (conv2d), or pooling window
             (average pooling; stride equals the window, remainder dropped)
    """

    kind: str
    units: int | None = None
    filters: int | None = None
    kernel: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.units is not None:
            d["units"] = int(self.units)
        if self.filters is not None:
            d["filters"] = int(self.filters)
        if self.kernel is not None:
            k = self.kernel
            d["kernel"] = int(k) if np.isscalar(k) else [int(v) for v in k]
        return d

    @staticmethod
    def from_dict(d: dict) -> "LayerSpec":
        kernel = d.get("kernel")
        if isinstance(kernel, list):
            kernel = tuple(kernel)
        return LayerSpec(
            kind=d["kind"],
            units=d.get("units"),
            filters=d.get("filters"),
            kernel=kernel,
        )


def dense(units: int) -> LayerSpec:
    return LayerSpec("dense", units=units)


def conv1d(filters: int, kernel: int) -> LayerSpec:
    return LayerSpec("conv1d", filters=filters, kernel=int(kernel))


def conv2d(filters: int, kernel) -> LayerSpec:
    k = (kernel, kernel) if np.isscalar(kernel) else tuple(kernel)
    return LayerSpec("conv2d", filters=filters, kernel=k)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def avgpool1d(window: int) -> LayerSpec:
    return LayerSpec("avgpool1d", kernel=int(window))


def avgpool2d(window) -> LayerSpec:
    w = (window, window) if np.isscalar(window) else tuple(window)
    return LayerSpec("avgpool2d", kernel=w)


def infer_output_shape(spec: LayerSpec, in_shape: tuple) -> tuple:
    """Shape (without batch axis) this layer emits for the given input."""
    if spec.kind == "relu":
        return in_shape
    if spec.kind == "flatten":
        return (int(np.prod(in_shape)),)
    if spec.kind == "dense":
        if len(in_shape) != 1:
            raise ShapeMismatch(
                f"dense layer needs a flat input, got shape {in_shape}"
            )
        return (spec.units,)
    if spec.kind == "conv1d":
        if len(in_shape) != 2:
            raise ShapeMismatch(f"conv1d needs (length, channels), got {in_shape}")
        length, _ = in_shape
        out_len = length - spec.kernel + 1
        if out_len < 1:
            raise ShapeMismatch(
                f"conv1d kernel {spec.kernel} too long for input length {length}"
            )
        return (out_len, spec.filters)
    if spec.kind == "conv2d":
        if len(in_shape) != 3:
            raise ShapeMismatch(f"conv2d needs (h, w, channels), got {in_shape}")
        h, w, _ = in_shape
        kh, kw = spec.kernel
        oh, ow = h - kh + 1, w - kw + 1
        if oh < 1 or ow < 1:
            raise ShapeMismatch(
                f"conv2d kernel {spec.kernel} too large for input {in_shape[:2]}"
            )
        return (oh, ow, spec.filters)
    if spec.kind == "avgpool1d":
        if len(in_shape) != 2:
            raise ShapeMismatch(f"avgpool1d needs (length, channels), got {in_shape}")
        out_len = in_shape[0] // spec.kernel
        if out_len < 1:
            raise ShapeMismatch(
                f"pooling window {spec.kernel} exceeds input length {in_shape[0]}"
            )
        return (out_len, in_shape[1])
    if spec.kind == "avgpool2d":
        if len(in_shape) != 3:
            raise ShapeMismatch(f"avgpool2d needs (h, w, channels), got {in_shape}")
        wh, ww = spec.kernel
        oh, ow = in_shape[0] // wh, in_shape[1] // ww
        if oh < 1 or ow < 1:
            raise ShapeMismatch(
                f"pooling window {spec.kernel} exceeds input {in_shape[:2]}"
            )
        return (oh, ow, in_shape[2])
    raise ShapeMismatch(f"unknown kind {spec.kind}")


def init_weights(spec: LayerSpec, in_shape: tuple, rng) -> list[np.ndarray]:
    """Fan-scaled uniform init (+- sqrt(6/(fan_in+fan_out))), zero biases."""
    if spec.kind in ("relu", "flatten", "avgpool1d", "avgpool2d"):
        return []
    if spec.kind == "dense":
        fan_in, fan_out = in_shape[0], spec.units
        w_shape = (fan_in, fan_out)
        b_shape = (spec.units,)
    elif spec.kind == "conv1d":
        cin = in_shape[1]
        fan_in = spec.kernel * cin
        fan_out = spec.kernel * spec.filters
        w_shape = (spec.kernel, cin, spec.filters)
        b_shape = (spec.filters,)
    else:  # conv2d
        kh, kw = spec.kernel
        cin = in_shape[2]
        fan_in = kh * kw * cin
        fan_out = kh * kw * spec.filters
        w_shape = (kh, kw, cin, spec.filters)
        b_shape = (spec.filters,)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    w = rng.uniform(-limit, limit, size=w_shape)
    return [w, np.zeros(b_shape)]


def forward_one(spec: LayerSpec, weights: list, x: np.ndarray):
    """Apply one layer; returns (output, cache-for-backward)."""
    if spec.kind == "relu":
        return np.maximum(x, 0.0), x
    if spec.kind == "flatten":
        return x.reshape(x.shape[0], -1), x.shape
    if spec.kind == "dense":
        w, b = weights
        return x @ w + b, x
    if spec.kind == "conv1d":
        w, b = weights
        k = spec.kernel
        win = sliding_window_view(x, k, axis=1)  # (n, L', c, k)
        out = np.tensordot(win, w, axes=([2, 3], [1, 0])) + b
        return out, win
    if spec.kind == "conv2d":
        w, b = weights
        kh, kw = spec.kernel
        win = sliding_window_view(x, (kh, kw), axis=(1, 2))  # (n, h', w', c, kh, kw)
        out = np.tensordot(win, w, axes=([3, 4, 5], [2, 0, 1])) + b
        return out, win
    if spec.kind == "avgpool1d":
        w = spec.kernel
        n, length, c = x.shape
        out_len = length // w
        blocks = x[:, : out_len * w, :].reshape(n, out_len, w, c)
        return blocks.mean(axis=2), x.shape
    # avgpool2d
    wh, ww = spec.kernel
    n, h, wd, c = x.shape
    oh, ow = h // wh, wd // ww
    blocks = x[:, : oh * wh, : ow * ww, :].reshape(n, oh, wh, ow, ww, c)
    return blocks.mean(axis=(2, 4)), x.shape


def backward_one(spec: LayerSpec, weights: list, cache, grad_out: np.ndarray):
    """Gradient of one layer: returns (grad_input, [grad per weight])."""
    if spec.kind == "relu":
        x = cache
        return grad_out * (x > 0), []
    if spec.kind == "flatten":
        return grad_out.reshape(cache), []
    if spec.kind == "dense":
        w, _ = weights
        x = cache
        return grad_out @ w.T, [x.T @ grad_out, grad_out.sum(axis=0)]
    if spec.kind == "conv1d":
        w, _ = weights
        win = cache
        k = spec.kernel
        dw = np.tensordot(win, grad_out, axes=([0, 1], [0, 1])).transpose(1, 0, 2)
        db = grad_out.sum(axis=(0, 1))
        gpad = np.pad(grad_out, ((0, 0), (k - 1, k - 1), (0, 0)))
        gwin = sliding_window_view(gpad, k, axis=1)  # (n, L, f, k)
        dx = np.tensordot(gwin, w[::-1], axes=([2, 3], [2, 0]))
        return dx, [dw, db]
    if spec.kind == "conv2d":
        w, _ = weights
        win = cache
        kh, kw = spec.kernel
        dw = np.tensordot(win, grad_out, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
        db = grad_out.sum(axis=(0, 1, 2))
        gpad = np.pad(grad_out, ((0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1), (0, 0)))
        gwin = sliding_window_view(gpad, (kh, kw), axis=(1, 2))  # (n, h, w, f, kh, kw)
        dx = np.tensordot(gwin, w[::-1, ::-1], axes=([3, 4, 5], [3, 0, 1]))
        return dx, [dw, db]
    if spec.kind == "avgpool1d":
        w = spec.kernel
        n, length, c = cache
        out_len = length // w
        dx = np.zeros(cache)
        spread = np.repeat(grad_out / w, w, axis=1)
        dx[:, : out_len * w, :] = spread
        return dx, []
    # avgpool2d
    wh, ww = spec.kernel
    n, h, wd, c = cache
    oh, ow = h // wh, wd // ww
    dx = np.zeros(cache)
    spread = np.repeat(np.repeat(grad_out / (wh * ww), wh, axis=1), ww, axis=2)
    dx[:, : oh * wh, : ow * ww, :] = spread
    return dx, []
