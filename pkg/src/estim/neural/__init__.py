"""Minimal feed-forward network engine: dense/conv layers, MSE, Adam."""

from .layers import LayerSpec, avgpool1d, avgpool2d, conv1d, conv2d, dense, flatten, relu
from .network import (
    NetworkSpec,
    TrainedNetwork,
    backprop,
    dumps_network,
    forward,
    load_network,
    loads_network,
    mse_loss,
    save_network,
)
from .training import TrainConfig, initialize, retrain_reduced_lr, train

__all__ = [
    "LayerSpec",
    "NetworkSpec",
    "TrainConfig",
    "TrainedNetwork",
    "avgpool1d",
    "avgpool2d",
    "backprop",
    "conv1d",
    "conv2d",
    "dense",
    "dumps_network",
    "flatten",
    "forward",
    "initialize",
    "load_network",
    "loads_network",
    "mse_loss",
    "relu",
    "retrain_reduced_lr",
    "save_network",
    "train",
]
