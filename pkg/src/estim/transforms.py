"""Invertible parameter reparameterizations.

Networks always train on transformed scales: unbounded, roughly symmetric
coordinates behave far better under a quadratic loss than raw, boundary-
constrained parameters. The registry maps string ids used in experiment
configs to :class:`Transform` instances.

Registered ids:

    identity     x -> x                 on R
    log          x -> log(x)            on (0, inf)
    logit2       x -> log(x / (2 - x))  on (0, 2)
    fisher       x -> log((1+x)/(1-x))  on (-1, 1)
    log-shift-2  x -> log(x - 2)        on (2, inf)

The Gaussian moment pair (m1, m2) = (mu, log(mu^2 + sigma^2)) is a joint
map of two parameters and lives in :func:`moment_map` / :func:`moment_unmap`
rather than the scalar registry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidMoments

__all__ = [
    "Transform",
    "REGISTRY",
    "get_transform",
    "apply",
    "invert",
    "logit2",
    "moment_map",
    "moment_unmap",
]

_INF = float("inf")


@dataclass(frozen=True)
class Transform:
    """Strictly monotone map with open-interval domain and codomain."""

    name: str
    fwd: Callable[[float], float]
    inv: Callable[[float], float]
    domain: tuple  # open interval of valid inputs to fwd
    codomain: tuple  # open interval of valid inputs to inv

    def __call__(self, x):
        return apply(self, x)


def _check(value: float, interval: tuple) -> None:
    lo, hi = interval
    if not (lo < value < hi):
        raise DomainError(value, interval)


def apply(t: Transform, x) -> float:
    """Forward map; raises DomainError outside the open domain."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(x, t.domain)
    _check(x, t.domain)
    return float(t.fwd(x))


def invert(t: Transform, y) -> float:
    """Inverse map; raises DomainError outside the open codomain."""
    y = float(y)
    if not math.isfinite(y):
        raise DomainError(y, t.codomain)
    _check(y, t.codomain)
    return float(t.inv(y))


def logit2(x: float) -> float:
    """Generalized logit on (0, 2): log(x / (2 - x)).

    The smoothness parameter of the max-stable model lives in (0, 2], so
    the standard (0, 1) logit is unusable; this variant is symmetric
    about 1 and evaluates at 1.9 where the sampling box needs it.
    """
    x = float(x)
    _check(x, (0.0, 2.0))
    return math.log(x / (2.0 - x))


def _logit2_inv(y: float) -> float:
    return 2.0 / (1.0 + math.exp(-y))


REGISTRY: dict[str, Transform] = {
    "identity": Transform(
        "identity", lambda x: x, lambda y: y, (-_INF, _INF), (-_INF, _INF)
    ),
    "log": Transform("log", math.log, math.exp, (0.0, _INF), (-_INF, _INF)),
    "logit2": Transform("logit2", logit2, _logit2_inv, (0.0, 2.0), (-_INF, _INF)),
    "fisher": Transform(
        "fisher",
        # log1p keeps strict monotonicity down to subnormal inputs
        lambda x: math.log1p(x) - math.log1p(-x),
        lambda y: math.tanh(y / 2.0),
        (-1.0, 1.0),
        (-_INF, _INF),
    ),
    "log-shift-2": Transform(
        "log-shift-2",
        lambda x: math.log(x - 2.0),
        lambda y: math.exp(y) + 2.0,
        (2.0, _INF),
        (-_INF, _INF),
    ),
}


def get_transform(name: str) -> Transform:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown transform {name!r}; known: {sorted(REGISTRY)}"
        ) from None


def moment_map(mu: float, var: float) -> tuple[float, float]:
    """(mu, sigma^2) -> (m1, m2) = (mu, log(mu^2 + sigma^2))."""
    if not var > 0:
        raise DomainError(var, (0.0, _INF))
    return float(mu), math.log(mu * mu + var)


def moment_unmap(m1: float, m2: float) -> tuple[float, float]:
    """(m1, m2) -> (mu, sigma^2); the pair must satisfy exp(m2) > m1^2."""
    second = math.exp(m2)
    var = second - m1 * m1
    if not var > 0:
        raise InvalidMoments(
            f"exp(m2)={second:.6g} must exceed m1^2={m1 * m1:.6g}"
        )
    return float(m1), var


def apply_vector(names: list[str], values) -> np.ndarray:
    """Apply per-coordinate transforms to a parameter vector."""
    return np.array(
        [apply(get_transform(n), v) for n, v in zip(names, values, strict=True)]
    )


def invert_vector(names: list[str], values) -> np.ndarray:
    """Invert per-coordinate transforms on a transformed vector."""
    return np.array(
        [invert(get_transform(n), v) for n, v in zip(names, values, strict=True)]
    )
