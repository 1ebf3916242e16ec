"""Seedable i.i.d. Gaussian, AR(1) and stochastic-volatility simulators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ..core import RngStream
from ..errors import BadDof, NonStationary

__all__ = ["SvolParams", "sim_gaussian_iid", "sim_ar1", "sim_svol"]


@dataclass(frozen=True)
class SvolParams:
    """Stochastic-volatility parameters: AR coefficient, t dof, innovation sd."""

    rho: float
    nu: float
    sigma: float = 0.1

    def validate(self) -> None:
        if not abs(self.rho) < 1:
            raise NonStationary(f"|rho| must be < 1, got {self.rho}")
        if not self.nu > 2:
            raise BadDof(f"nu must exceed 2 for finite variance, got {self.nu}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def sim_gaussian_iid(mu: float, logvar: float, j: int, rng: RngStream) -> np.ndarray:
    """j i.i.d. N(mu, exp(logvar)) draws."""
    g = rng.generator()
    return mu + np.exp(0.5 * logvar) * g.standard_normal(int(j))


def _ar1_path(rho: float, t: int, g: np.random.Generator, innov_sd: float = 1.0) -> np.ndarray:
    """Stationary AR(1): x(0) ~ N(0, innov_sd^2/(1-rho^2)), then the recursion."""
    e = innov_sd * g.standard_normal(int(t))
    x = np.empty(int(t))
    x[0] = e[0] / np.sqrt(1.0 - rho * rho)
    if t > 1:
        x[1:], _ = lfilter([1.0], [1.0, -rho], e[1:], zi=np.array([rho * x[0]]))
    return x


def sim_ar1(rho: float, t: int, rng: RngStream) -> np.ndarray:
    """Stationary AR(1) with unit innovations."""
    if not abs(rho) < 1:
        raise NonStationary(f"|rho| must be < 1, got {rho}")
    return _ar1_path(rho, t, rng.generator())


def standardized_t(nu: float, size, g: np.random.Generator) -> np.ndarray:
    """Unit-variance Student-t draws: t_nu scaled by sqrt((nu-2)/nu)."""
    if not nu > 2:
        raise BadDof(f"nu must exceed 2, got {nu}")
    return g.standard_t(nu, size) * np.sqrt((nu - 2.0) / nu)


def sim_svol(p: SvolParams, t: int, rng: RngStream, scaled: bool = True) -> np.ndarray:
    """Stochastic-volatility series x(t) = exp(h(t)/2) * eps(t).

    The latent h is a stationary zero-mean AR(1) with coefficient rho and
    innovation sd sigma; eps is unit-variance Student-t with nu dof.

    With ``scaled`` (the default), both h and x are standardized to unit
    theoretical variance: h uses innovation sd sqrt(1-rho^2) (stationary
    variance one, so sigma drops out) and x is divided by
    sqrt(E exp(h)) = exp(1/4). Only (rho, nu) then matter for the law of x.
    """
    p.validate()
    g = rng.generator()
    if scaled:
        h = _ar1_path(p.rho, t, g, innov_sd=np.sqrt(1.0 - p.rho * p.rho))
        eps = standardized_t(p.nu, int(t), g)
        return np.exp(0.5 * h) * eps / np.exp(0.25)
    h = _ar1_path(p.rho, t, g, innov_sd=p.sigma)
    eps = standardized_t(p.nu, int(t), g)
    return np.exp(0.5 * h) * eps


def sim_svol_latent(p: SvolParams, t: int, rng: RngStream, scaled: bool = True) -> np.ndarray:
    """The latent volatility path h alone (for moment checks)."""
    p.validate()
    g = rng.generator()
    sd = np.sqrt(1.0 - p.rho * p.rho) if scaled else p.sigma
    return _ar1_path(p.rho, t, g, innov_sd=sd)
