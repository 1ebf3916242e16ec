"""Exception hierarchy shared across the toolkit."""


class EstimError(Exception):
    """Base class for all estim errors."""


class NotPositiveDefinite(EstimError):
    """Matrix is not positive definite, even after one jitter retry."""


class EmptySample(EstimError):
    """An empty sample was passed where at least one value is required."""


class InvalidBounds(EstimError):
    """Lower bound is not strictly below upper bound."""


class ShapeMismatch(EstimError):
    """Array shapes do not compose for the requested operation."""


class NonFiniteLoss(EstimError):
    """Training loss diverged to NaN/inf.

    Carries the epoch index at which divergence was detected.
    """

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class NonStationary(EstimError):
    """Autoregressive coefficient outside the stationarity region."""


class BadDof(EstimError):
    """Student-t degrees of freedom must exceed 2 for finite variance."""


class GridTooLarge(EstimError):
    """Requested spatial grid exceeds the configured site budget."""


class DegenerateField(EstimError):
    """Field has zero variance; variogram fitting is undefined."""


class DomainError(EstimError):
    """Value outside a transform's domain. Carries value and interval."""

    def __init__(self, value: float, interval: tuple):
        super().__init__(f"value {value!r} outside open interval {interval}")
        self.value = value
        self.interval = interval


class InvalidMoments(EstimError):
    """(m1, m2) pair implies a non-positive variance."""


class DegenerateBootstrap(EstimError, UserWarning):
    """All bootstrap samples identical; no spread to update bounds from.

    Doubles as a warning category: the bound update survives with a
    width-epsilon box and warns instead of aborting the run.
    """


class SimulatorDomainError(EstimError):
    """Inverse-transformed estimate violates the simulator's constraints."""


class LengthError(EstimError):
    """Series length incompatible with the requested replication."""


class ConfigError(EstimError):
    """Unknown preset or malformed experiment configuration."""


class DegenerateInput(EstimError):
    """Too few estimates to compute dispersion metrics."""


class NotConverged(EstimError):
    """Sequential run hit the iteration cap before the stop criterion.

    Used as a status marker by the CLI (exit code), not raised by the
    driver itself.
    """


class BiasWarning(UserWarning):
    """Simulation budget exhausted; output may be biased."""
