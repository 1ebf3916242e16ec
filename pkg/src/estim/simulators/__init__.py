"""Seedable generative models and the variogram-based initializer."""

from .basic import SvolParams, sim_ar1, sim_gaussian_iid, sim_svol, sim_svol_latent
from .brown_resnick import (
    BrownResnickParams,
    BrownResnickSampler,
    sim_brown_resnick,
)
from .gp import (
    GpSampler,
    Grid2D,
    PowExpFit,
    empirical_semivariogram,
    fit_powexp,
    powexp_cov,
    sim_gp,
)

__all__ = [
    "BrownResnickParams",
    "BrownResnickSampler",
    "GpSampler",
    "Grid2D",
    "PowExpFit",
    "SvolParams",
    "empirical_semivariogram",
    "fit_powexp",
    "powexp_cov",
    "sim_ar1",
    "sim_brown_resnick",
    "sim_gaussian_iid",
    "sim_gp",
    "sim_svol",
    "sim_svol_latent",
]
