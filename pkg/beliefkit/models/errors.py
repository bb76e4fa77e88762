"""The errors.py file defines the exceptions raised across the package.

Every exception belongs to one of two families. Configuration errors are raised when a
parameter set or config file cannot be used as given; data errors are raised when the
input series cannot support the requested computation. The command line maps the first
family to exit code 2 and the second to exit code 3.
"""
from typing import Iterable, Sequence, Tuple


class ConfigurationError(Exception):
    """The ConfigurationError class defines the base exception for unusable parameters."""

    exit_code = 2

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason

    def __str__(self):
        return self.message

    @property
    def message(self) -> str:
        """Get the error message."""
        return f"Invalid configuration for '{self.field}': {self.reason}"


class DataQualityError(Exception):
    """The DataQualityError class defines the base exception for unusable input data."""

    exit_code = 3

    def __init__(self, detail: str):
        self.detail = detail

    def __str__(self):
        return self.message

    @property
    def message(self) -> str:
        """Get the error message."""
        return self.detail


class UnsupportedJumpFamilyError(ConfigurationError):
    """Raised when an operation has no rule for the requested jump family."""

    def __init__(self, family: str, operation: str):
        super().__init__("jump_law.family", f"family '{family}' is not supported by {operation}.")


class StepSizeError(ConfigurationError):
    """Raised when the jump probability per step reaches one."""

    def __init__(self, max_rate: float, dt: float):
        self.max_rate = max_rate
        self.dt = dt
        super().__init__(
            "dt",
            f"lambda * dt = {max_rate * dt:.4g} must stay below 1 (max lambda {max_rate:.4g}/s, "
            f"dt {dt:.4g} s); reduce the step size.",
        )


class GridRefinementError(ConfigurationError):
    """Raised when the explicit jump step of the PIDE solver is unstable."""

    def __init__(self, max_rate: float, dt_grid: float):
        self.max_rate = max_rate
        self.dt_grid = dt_grid
        super().__init__(
            "pide.n_t",
            f"lambda * dt_grid = {max_rate * dt_grid:.4g} exceeds 0.5; increase n_t so that "
            f"dt_grid <= {0.5 / max_rate:.4g} s.",
        )


class BumpSizeError(ConfigurationError):
    """Raised when a Greek bump would produce invalid parameters."""

    def __init__(self, parameter: str, bumped_value: float):
        self.parameter = parameter
        self.bumped_value = bumped_value
        super().__init__(
            f"bumps.{parameter}",
            f"bumped value {bumped_value:.6g} is outside the valid range; use a smaller bump.",
        )


class EmptySeriesError(DataQualityError):
    """Raised when a series has no observations at all."""

    def __init__(self, what: str = "series"):
        super().__init__(f"The {what} is empty.")


class InsufficientDataError(DataQualityError):
    """Raised when fewer observations are available than an operation requires."""

    def __init__(self, what: str, have: int, need: int):
        self.have = have
        self.need = need
        super().__init__(f"{what} needs at least {need} observations, got {have}.")


class DiffusiveDegenerateError(DataQualityError):
    """Raised when a calibration window has no diffusive weight."""

    def __init__(self, window_start: int, window_end: int):
        self.window_start = window_start
        self.window_end = window_end
        super().__init__(
            f"Window [{window_start}, {window_end}) has zero diffusive weight "
            "(every increment is attributed to jumps)."
        )


class RankDeficientFitError(DataQualityError):
    """Raised when a penalised surface fit is underdetermined."""

    def __init__(self, rank: int, n_coefficients: int):
        self.rank = rank
        self.n_coefficients = n_coefficients
        super().__init__(
            f"Surface fit is rank deficient ({rank} < {n_coefficients}); populate more cells, "
            "fix a larger alpha, or reduce the knot counts."
        )


class OutOfHullError(DataQualityError):
    """Raised when a surface is queried outside its knot hull."""

    def __init__(self, tau: float, m: float, tau_bounds: Tuple[float, float], m_bounds: Tuple[float, float]):
        self.tau = tau
        self.m = m
        self.tau_bounds = tau_bounds
        self.m_bounds = m_bounds
        super().__init__(
            f"Query (tau={tau:.6g}, m={m:.6g}) is outside the surface hull "
            f"tau in [{tau_bounds[0]:.6g}, {tau_bounds[1]:.6g}], m in [{m_bounds[0]:.6g}, {m_bounds[1]:.6g}]."
        )


class CorrelationUndefinedError(DataQualityError):
    """Raised when a correlation strike is requested with a zero marginal variance."""

    def __init__(self, marginal_i: float, marginal_j: float):
        super().__init__(
            f"Correlation strike is undefined with marginal variances {marginal_i:.6g} and {marginal_j:.6g}."
        )


class SchemaMismatchError(DataQualityError):
    """Raised when an input CSV does not carry the expected columns."""

    def __init__(self, path: str, missing: Iterable[str], found: Sequence[str]):
        self.path = path
        self.missing = sorted(missing)
        self.found = list(found)
        super().__init__(
            f"{path}: missing column(s) {', '.join(self.missing)}; found {', '.join(self.found)}."
        )


class MissingArtifactError(DataQualityError):
    """Raised when an upstream stage output is not present."""

    def __init__(self, path: str, producer: str):
        self.path = path
        self.producer = producer
        super().__init__(f"{path} does not exist; run `beliefkit {producer}` first.")
