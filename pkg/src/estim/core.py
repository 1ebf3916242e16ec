"""Numerical substrate: splittable RNG streams, Cholesky, order statistics.

All arrays are 64-bit numpy arrays. Every stochastic routine in the
package receives an :class:`RngStream`, so a (seed, stream) pair pins the
full output of any run, and parallel consumers get independent streams by
deriving children instead of sharing a generator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySample, InvalidBounds, NotPositiveDefinite, ShapeMismatch

__all__ = [
    "RngStream",
    "SampleSummary",
    "cholesky",
    "quantile",
    "draw_normal",
    "draw_uniform",
    "sample_summary",
]

_U64 = (1 << 64) - 1


def _mix(a: int, b: int) -> int:
    """Combine two 64-bit words into a well-scattered 64-bit word.

    splitmix64 finalizer over the sum; collisions between distinct child
    paths are astronomically unlikely and the result is platform-stable.
    """
    z = (a + 0x9E3779B97F4A7C15 * (b + 1)) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return (z ^ (z >> 31)) & _U64


def _key_id(key) -> int:
    """Map an int or str path component to a 64-bit id."""
    if isinstance(key, (int, np.integer)):
        return int(key) & _U64
    if isinstance(key, str):
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"rng path components must be int or str, got {type(key)!r}")


@dataclass(frozen=True)
class RngStream:
    """Immutable handle for a counter-based (Philox) random stream.

    Equal (seed, stream) pairs produce bit-identical draw sequences on any
    platform. ``generator()`` opens a fresh generator positioned at the
    start of the stream, so operations that take an RngStream are pure.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = ((self.seed & _U64) << 64) | (self.stream & _U64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *path) -> "RngStream":
        """Derive an independent substream from int/str path components."""
        s = self.stream
        for key in path:
            s = _mix(s, _key_id(key))
        return RngStream(self.seed, s)


@dataclass(frozen=True)
class SampleSummary:
    """Median, sample sd (n-1 denominator) and selected quantiles."""

    median: float
    sd: float
    quantiles: dict = field(default_factory=dict)


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == a.

    ``a`` must be square and symmetric to ~1e-10 relative. If the plain
    factorization fails, one jitter retry adds 1e-10 * trace/n to the
    diagonal (near-singular covariances at tiny spatial distances);
    a second failure raises :class:`NotPositiveDefinite`.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ShapeMismatch(f"cholesky expects a square 2-d matrix, got shape {a.shape}")
    scale = np.max(np.abs(a))
    if scale > 0 and np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise NotPositiveDefinite("matrix is not symmetric")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    n = a.shape[0]
    jitter = 1e-10 * np.trace(a) / n
    if jitter <= 0:
        jitter = 1e-12
    try:
        return np.linalg.cholesky(a + jitter * np.eye(n))
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(
            f"matrix of size {n} not positive definite after jitter {jitter:.3e}"
        ) from None


def quantile(samples, alpha: float) -> float:
    """Linear-interpolation quantile on sorted samples.

    With sorted s and h = (n-1)*alpha, returns
    s[floor(h)] + (h - floor(h)) * (s[floor(h)+1] - s[floor(h)]).
    This is the common statistical default; all bound updates in the
    sequential driver depend on this exact convention.
    """
    s = np.asarray(samples, dtype=np.float64)
    if s.size == 0:
        raise EmptySample("quantile of an empty sample")
    if not np.all(np.isfinite(s)):
        raise EmptySample("quantile requires finite samples")
    return float(np.quantile(s, alpha, method="linear"))


def sample_summary(samples, alphas=(0.025, 0.975)) -> SampleSummary:
    """Summary of a 1-d sample: median, sd (ddof=1) and quantiles."""
    s = np.asarray(samples, dtype=np.float64)
    if s.size == 0:
        raise EmptySample("summary of an empty sample")
    sd = float(np.std(s, ddof=1)) if s.size > 1 else 0.0
    qs = {float(a): quantile(s, a) for a in alphas}
    return SampleSummary(median=float(np.median(s)), sd=sd, quantiles=qs)


def draw_normal(rng: RngStream, n: int) -> np.ndarray:
    """n i.i.d. standard normal draws, reproducible given the stream."""
    return rng.generator().standard_normal(int(n))


def draw_uniform(rng: RngStream, a: float, b: float, n: int) -> np.ndarray:
    """n i.i.d. Uniform[a, b) draws; a must be strictly below b."""
    if not a < b:
        raise InvalidBounds(f"uniform bounds require a < b, got ({a}, {b})")
    return rng.generator().uniform(a, b, int(n))
