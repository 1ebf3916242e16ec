"""Model adapters: transformed parameter vectors in, simulated data out.

Each adapter owns the inverse transform from the network's scale back to
natural parameters and the data representation the network consumes
(e.g. log fields for max-stable data). Training-time simulation clamps
mildly invalid parameter combinations (a sampling box may graze the
invalid region); bootstrap simulation is strict and raises
:class:`SimulatorDomainError`.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .core import RngStream
from .errors import SimulatorDomainError
from .simulators import (
    BrownResnickParams,
    BrownResnickSampler,
    Grid2D,
    SvolParams,
    sim_ar1,
    sim_gaussian_iid,
    sim_svol,
)
from .transforms import get_transform, invert

__all__ = [
    "SimModelBase",
    "GaussVarModel",
    "GaussMeanVarModel",
    "GaussMomentsModel",
    "BrownResnickModel",
    "SvolModel",
    "Ar1Model",
    "build_model",
]

MIN_VARIANCE = 1e-6


class SimModelBase:
    """Default: training-time simulation is the strict one."""

    data_shape: tuple = ()

    def simulate(self, theta: np.ndarray, rng: RngStream) -> np.ndarray:
        raise NotImplementedError

    def simulate_train(self, theta: np.ndarray, rng: RngStream) -> np.ndarray:
        return self.simulate(theta, rng)


class GaussVarModel(SimModelBase):
    """Single parameter log(sigma^2); the mean is known and fixed.

    Samples are sorted: order statistics carry the same information for
    i.i.d. data and give the network a far smoother map to learn.
    """

    def __init__(self, j: int = 20, mu: float = 1.0, sort: bool = True):
        self.j = int(j)
        self.mu = float(mu)
        self.sort = bool(sort)
        self.data_shape = (self.j,)

    def simulate(self, theta, rng):
        x = sim_gaussian_iid(self.mu, float(theta[0]), self.j, rng)
        return np.sort(x) if self.sort else x


class GaussMeanVarModel(SimModelBase):
    """Two orthogonal parameters (mu, log(sigma^2)); sorted samples."""

    def __init__(self, j: int = 20, sort: bool = True):
        self.j = int(j)
        self.sort = bool(sort)
        self.data_shape = (self.j,)

    def simulate(self, theta, rng):
        x = sim_gaussian_iid(float(theta[0]), float(theta[1]), self.j, rng)
        return np.sort(x) if self.sort else x


class GaussMomentsModel(SimModelBase):
    """Moment pair, either (m1, log m2') or raw (m1, m2') with m2' = mu^2 + var.

    The raw variant exists to quantify what the reparameterization buys;
    invalid pairs (implied variance <= 0) are clamped to MIN_VARIANCE
    during training simulation and rejected during bootstrap.
    """

    def __init__(self, j: int = 20, raw: bool = False, sort: bool = True):
        self.j = int(j)
        self.raw = bool(raw)
        self.sort = bool(sort)
        self.data_shape = (self.j,)
        self._warned = False

    def _invert(self, theta, clamp: bool):
        m1 = float(theta[0])
        second = float(theta[1]) if self.raw else math.exp(float(theta[1]))
        var = second - m1 * m1
        if var <= 0:
            if not clamp:
                raise SimulatorDomainError(
                    f"moment pair (m1={m1:.4g}, second={second:.4g}) implies "
                    f"variance {var:.4g} <= 0"
                )
            if not self._warned:
                warnings.warn(
                    "moment box grazes the invalid region; clamping variance "
                    f"to {MIN_VARIANCE}",
                    RuntimeWarning,
                    stacklevel=3,
                )
                self._warned = True
            var = MIN_VARIANCE
        return m1, var

    def simulate(self, theta, rng):
        mu, var = self._invert(theta, clamp=False)
        x = sim_gaussian_iid(mu, math.log(var), self.j, rng)
        return np.sort(x) if self.sort else x

    def simulate_train(self, theta, rng):
        mu, var = self._invert(theta, clamp=True)
        x = sim_gaussian_iid(mu, math.log(var), self.j, rng)
        return np.sort(x) if self.sort else x


class BrownResnickModel(SimModelBase):
    """Max-stable field with theta = (log range, logit2 smoothness).

    The network consumes log fields: unit-Frechet margins are far too
    heavy-tailed for a quadratic loss, and the log map makes them Gumbel.
    """

    def __init__(self, grid: Grid2D, log_data: bool = True):
        self.grid = grid
        self.log_data = bool(log_data)
        self.data_shape = (grid.nx, grid.ny, 1)

    def params_from_theta(self, theta) -> BrownResnickParams:
        lam = math.exp(float(theta[0]))
        nu = invert(get_transform("logit2"), float(theta[1]))
        try:
            p = BrownResnickParams(lam, nu)
            p.validate()
        except ValueError as err:
            raise SimulatorDomainError(str(err)) from None
        return p

    def simulate(self, theta, rng):
        sampler = BrownResnickSampler(self.params_from_theta(theta), self.grid)
        field = sampler.draw(rng)
        return np.log(field) if self.log_data else field

    def simulate_batch(self, theta, rng, n: int) -> np.ndarray:
        """n fields at one parameter value, reusing the Cholesky factor."""
        sampler = BrownResnickSampler(self.params_from_theta(theta), self.grid)
        fields = sampler.draw_many(rng, n)
        return np.log(fields) if self.log_data else fields


class SvolModel(SimModelBase):
    """Scaled stochastic-volatility series, theta = (f1(rho), f2(nu))."""

    def __init__(self, t: int, scaled: bool = True):
        self.t = int(t)
        self.scaled = bool(scaled)
        self.data_shape = (self.t, 1)

    def params_from_theta(self, theta) -> SvolParams:
        rho = invert(get_transform("fisher"), float(theta[0]))
        nu = invert(get_transform("log-shift-2"), float(theta[1]))
        return SvolParams(rho=rho, nu=nu)

    def simulate(self, theta, rng):
        return sim_svol(self.params_from_theta(theta), self.t, rng, scaled=self.scaled)


class Ar1Model(SimModelBase):
    """AR(1) series with theta = (f1(rho),)."""

    def __init__(self, t: int):
        self.t = int(t)
        self.data_shape = (self.t, 1)

    def simulate(self, theta, rng):
        rho = invert(get_transform("fisher"), float(theta[0]))
        return sim_ar1(rho, self.t, rng)


def build_model(family: str, spec: dict) -> SimModelBase:
    """Model adapter from its config-dict form."""
    if family == "gauss-var":
        return GaussVarModel(
            j=spec.get("j", 20), mu=spec.get("mu", 1.0), sort=spec.get("sort", True)
        )
    if family == "gauss-meanvar":
        return GaussMeanVarModel(j=spec.get("j", 20), sort=spec.get("sort", True))
    if family == "gauss-moments":
        return GaussMomentsModel(
            j=spec.get("j", 20), raw=spec.get("raw", False), sort=spec.get("sort", True)
        )
    if family == "brown-resnick":
        grid = Grid2D(**spec["grid"])
        return BrownResnickModel(grid, log_data=spec.get("log_data", True))
    if family == "svol":
        return SvolModel(t=spec["t"], scaled=spec.get("scaled", True))
    if family == "ar1":
        return Ar1Model(t=spec["t"])
    raise KeyError(f"unknown model family {family!r}")
