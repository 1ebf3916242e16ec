"""estim: simulation-based black-box parameter estimation.

Small neural networks are trained on simulated (parameter, data) pairs;
a sequential procedure re-targets the simulation region around the
observed data with bootstrap-driven bound updates, and a replication
scheme estimates time series of arbitrary length against one pre-trained
network.
"""

from .core import RngStream, SampleSummary, cholesky, draw_normal, draw_uniform, quantile

__all__ = [
    "RngStream",
    "SampleSummary",
    "cholesky",
    "draw_normal",
    "draw_uniform",
    "quantile",
]

__version__ = "0.1.0"
