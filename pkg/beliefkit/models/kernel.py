"""The kernel.py file defines the data models for the logit jump-diffusion state model."""
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import ConfigDict, Field, field_validator, model_validator
from scipy import stats

from .base import BaseModel, BoolArray, FloatArray


class JumpFamily(Enum):
    """An enumeration of the supported jump-size laws."""

    GAUSSIAN = "symmetric-gaussian"
    DOUBLE_EXPONENTIAL = "double-exponential"
    EMPIRICAL_BINS = "empirical-bins"

    @staticmethod
    def schema() -> Dict[str, Any]:
        """Get the schema for the jump family enum.

        Returns:
            Dict[str, Any]: The schema for the jump family enum.
        """
        return {"type": "string", "enum": [family.value for family in JumpFamily]}


class JumpLaw(BaseModel):
    """The JumpLaw class defines a centred jump-size law in logit units.

    Attributes:
        family (JumpFamily): The law's family.
        sd (float): Standard deviation of the symmetric gaussian family.
        eta_up (float): Decay rate of upward double-exponential jumps.
        eta_down (float): Decay rate of downward double-exponential jumps.
        edges (List[float]): Bin edges of the empirical-bins family.
        masses (List[float]): Bin masses of the empirical-bins family.
    """

    family: JumpFamily = JumpFamily.GAUSSIAN
    sd: float = 0.0
    eta_up: Optional[float] = None
    eta_down: Optional[float] = None
    edges: Optional[List[float]] = None
    masses: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_parameters(self) -> "JumpLaw":
        if self.family is JumpFamily.GAUSSIAN:
            if not np.isfinite(self.sd) or self.sd < 0:
                raise ValueError(f"gaussian jump sd must be finite and >= 0, got {self.sd}")
        elif self.family is JumpFamily.DOUBLE_EXPONENTIAL:
            if self.eta_up is None or self.eta_down is None or self.eta_up <= 0 or self.eta_down <= 0:
                raise ValueError("double-exponential jumps need positive eta_up and eta_down")
        else:
            if self.edges is None or self.masses is None:
                raise ValueError("empirical-bins jumps need edges and masses")
            edges = np.asarray(self.edges, dtype=float)
            masses = np.asarray(self.masses, dtype=float)
            if edges.size != masses.size + 1 or np.any(np.diff(edges) <= 0):
                raise ValueError("empirical-bins edges must be increasing with one more entry than masses")
            if np.any(masses < 0) or abs(masses.sum() - 1.0) > 1e-12:
                raise ValueError(f"empirical-bins masses must be >= 0 and sum to 1, got {masses.sum()!r}")
        return self

    @classmethod
    def gaussian(cls, sd: float) -> "JumpLaw":
        """Build a symmetric gaussian law with the given standard deviation."""
        return cls(family=JumpFamily.GAUSSIAN, sd=sd)

    @property
    def p_up(self) -> float:
        """Probability of an upward double-exponential jump; it centres the law."""
        return self.eta_up / (self.eta_up + self.eta_down)

    @property
    def is_symmetric(self) -> bool:
        """Whether the law is symmetric around zero."""
        if self.family is JumpFamily.GAUSSIAN:
            return True
        if self.family is JumpFamily.DOUBLE_EXPONENTIAL:
            return self.eta_up == self.eta_down
        edges = np.asarray(self.edges)
        return bool(np.array_equal(edges, -edges[::-1]) and np.array_equal(self.masses, self.masses[::-1]))

    @property
    def mean(self) -> float:
        """Mean jump size."""
        if self.family is JumpFamily.EMPIRICAL_BINS:
            edges = np.asarray(self.edges)
            return float(np.sum(np.asarray(self.masses) * 0.5 * (edges[:-1] + edges[1:])))
        return 0.0

    @property
    def second_moment(self) -> float:
        """Second moment E[Z^2] in logit^2 units."""
        if self.family is JumpFamily.GAUSSIAN:
            return self.sd**2
        if self.family is JumpFamily.DOUBLE_EXPONENTIAL:
            p = self.p_up
            return p * 2.0 / self.eta_up**2 + (1.0 - p) * 2.0 / self.eta_down**2
        lo = np.asarray(self.edges[:-1])
        hi = np.asarray(self.edges[1:])
        return float(np.sum(np.asarray(self.masses) * (lo**2 + lo * hi + hi**2) / 3.0))

    @property
    def is_degenerate(self) -> bool:
        """Whether every jump has size zero."""
        return self.family is JumpFamily.GAUSSIAN and self.sd == 0.0

    def truncated_mean(self, radius: float) -> float:
        """Return E[chi(Z)] with chi(z) = z * 1{|z| < radius}."""
        if self.family is JumpFamily.GAUSSIAN:
            return 0.0
        if self.family is JumpFamily.DOUBLE_EXPONENTIAL:

            def _part(eta):
                return (1.0 - np.exp(-eta * radius) * (1.0 + eta * radius)) / eta

            return float(self.p_up * _part(self.eta_up) - (1.0 - self.p_up) * _part(self.eta_down))
        edges = np.asarray(self.edges)
        masses = np.asarray(self.masses)
        lo = np.clip(edges[:-1], -radius, radius)
        hi = np.clip(edges[1:], -radius, radius)
        widths = edges[1:] - edges[:-1]
        return float(np.sum(masses * (hi**2 - lo**2) / (2.0 * widths)))

    def pdf(self, z) -> np.ndarray:
        """Evaluate the jump density at z (zero everywhere for the degenerate law)."""
        z = np.asarray(z, dtype=float)
        if self.family is JumpFamily.GAUSSIAN:
            if self.sd == 0.0:
                return np.zeros_like(z)
            return stats.norm.pdf(z, scale=self.sd)
        if self.family is JumpFamily.DOUBLE_EXPONENTIAL:
            p = self.p_up
            up = p * self.eta_up * np.exp(-self.eta_up * np.maximum(z, 0.0))
            down = (1.0 - p) * self.eta_down * np.exp(self.eta_down * np.minimum(z, 0.0))
            return np.where(z >= 0.0, up, down)
        edges = np.asarray(self.edges)
        density = np.asarray(self.masses) / np.diff(edges)
        idx = np.searchsorted(edges, z, side="right") - 1
        inside = (idx >= 0) & (idx < density.size)
        return np.where(inside, density[np.clip(idx, 0, density.size - 1)], 0.0)

    def logpdf(self, z) -> np.ndarray:
        """Evaluate the log jump density at z."""
        if self.family is JumpFamily.GAUSSIAN and self.sd > 0.0:
            return stats.norm.logpdf(np.asarray(z, dtype=float), scale=self.sd)
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(z))

    def cdf(self, z) -> np.ndarray:
        """Evaluate the jump distribution function at z."""
        z = np.asarray(z, dtype=float)
        if self.family is JumpFamily.GAUSSIAN:
            if self.sd == 0.0:
                return (z >= 0.0).astype(float)
            return stats.norm.cdf(z, scale=self.sd)
        if self.family is JumpFamily.DOUBLE_EXPONENTIAL:
            p = self.p_up
            below = (1.0 - p) * np.exp(self.eta_down * np.minimum(z, 0.0))
            above = 1.0 - p * np.exp(-self.eta_up * np.maximum(z, 0.0))
            return np.where(z < 0.0, below, above)
        cumulative = np.concatenate([[0.0], np.cumsum(self.masses)])
        return np.interp(z, self.edges, cumulative, left=0.0, right=1.0)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw jump sizes from the law."""
        if self.family is JumpFamily.GAUSSIAN:
            return rng.normal(0.0, self.sd, size=size)
        if self.family is JumpFamily.DOUBLE_EXPONENTIAL:
            up = rng.random(size) < self.p_up
            magnitude = rng.exponential(1.0, size=size)
            return np.where(up, magnitude / self.eta_up, -magnitude / self.eta_down)
        edges = np.asarray(self.edges)
        bins = rng.choice(len(self.masses), size=size, p=np.asarray(self.masses))
        return edges[bins] + rng.random(size) * (edges[bins + 1] - edges[bins])

    def scaled(self, variance_factor: float) -> "JumpLaw":
        """Return the law rescaled so that its second moment is multiplied by variance_factor."""
        scale = float(np.sqrt(variance_factor))
        if self.family is JumpFamily.GAUSSIAN:
            return self.model_copy(update={"sd": self.sd * scale})
        if self.family is JumpFamily.DOUBLE_EXPONENTIAL:
            return self.model_copy(update={"eta_up": self.eta_up / scale, "eta_down": self.eta_down / scale})
        return self.model_copy(update={"edges": [edge * scale for edge in self.edges]})


class KernelParams(BaseModel):
    """The KernelParams class defines the parameter grids of the logit jump-diffusion.

    Grid entry u applies on the interval [u * dt, (u + 1) * dt); queries beyond the end of
    a grid hold its last value.

    Attributes:
        sigma_b (FloatArray): Belief volatility per step (logit per sqrt second).
        lam (FloatArray): Jump intensity per step (events per second), alias `lambda`.
        jump_law (JumpLaw): The jump-size law.
        dt (float): Grid spacing in seconds.
        truncation_radius (float): Radius of chi(z) = z * 1{|z| < radius}.
        drift_cap (float): Absolute cap on the drift (per second).
        sprime_floor (float): Floor applied to S'(x) in the drift denominator.
        compensation_draws (int): Draws for Monte Carlo jump compensation.
        compensation_seed (int): Seed for Monte Carlo jump compensation.
    """

    model_config = ConfigDict(populate_by_name=True)

    sigma_b: FloatArray
    lam: FloatArray = Field(alias="lambda")
    jump_law: JumpLaw = Field(default_factory=JumpLaw)
    dt: float = 1.0
    truncation_radius: float = 1.0
    drift_cap: float = 0.25
    sprime_floor: float = 1e-4
    compensation_draws: int = 600
    compensation_seed: int = 0

    @field_validator("sigma_b", "lam")
    @classmethod
    def _check_grid(cls, value: np.ndarray) -> np.ndarray:
        value = np.atleast_1d(np.asarray(value, dtype=float))
        if value.ndim != 1 or value.size == 0:
            raise ValueError("parameter grids must be non-empty one-dimensional arrays")
        if not np.all(np.isfinite(value)) or np.any(value < 0):
            raise ValueError("parameter grids must be finite and nonnegative")
        return value

    @model_validator(mode="after")
    def _check_scalars(self) -> "KernelParams":
        if self.dt <= 0 or self.drift_cap <= 0 or self.sprime_floor <= 0 or self.truncation_radius <= 0:
            raise ValueError("dt, drift_cap, sprime_floor and truncation_radius must be positive")
        if self.compensation_draws < 1:
            raise ValueError("compensation_draws must be at least 1")
        return self

    @classmethod
    def constant(cls, sigma_b: float, lam: float = 0.0, jump_law: Optional[JumpLaw] = None, **kwargs) -> "KernelParams":
        """Build parameters with constant grids."""
        return cls(sigma_b=[sigma_b], lam=[lam], jump_law=jump_law or JumpLaw(), **kwargs)

    @staticmethod
    def _take(grid: np.ndarray, steps: np.ndarray) -> np.ndarray:
        return grid[np.clip(steps, 0, grid.size - 1)]

    def sigma_at(self, steps) -> np.ndarray:
        """Belief volatility at integer grid steps."""
        return self._take(self.sigma_b, np.asarray(steps, dtype=int))

    def lambda_at(self, steps) -> np.ndarray:
        """Jump intensity at integer grid steps."""
        return self._take(self.lam, np.asarray(steps, dtype=int))

    def integrate(self, grid: np.ndarray, t0: float, T: float) -> float:
        """Integrate a step-function grid aligned with this parameter set over [t0, T]."""
        first = int(np.floor(t0 / self.dt))
        last = int(np.ceil(T / self.dt))
        steps = np.arange(first, max(last, first + 1))
        lo = np.maximum(steps * self.dt, t0)
        hi = np.minimum((steps + 1) * self.dt, T)
        return float(np.sum(self._take(np.asarray(grid, dtype=float), steps) * np.clip(hi - lo, 0.0, None)))

    def with_sigma_scale(self, factor: float) -> "KernelParams":
        """Return a copy with every belief volatility multiplied by factor."""
        return self.model_copy(update={"sigma_b": self.sigma_b * factor})

    def with_jump_variance_scale(self, factor: float) -> "KernelParams":
        """Return a copy whose jump second moment is multiplied by factor at fixed intensity."""
        return self.model_copy(update={"jump_law": self.jump_law.scaled(factor)})


class LogitPath(BaseModel):
    """The LogitPath class defines a simulated logit path.

    Attributes:
        t (FloatArray): Uniform time grid in seconds.
        x (FloatArray): Logit values.
        jump_marks (BoolArray): Whether a jump landed on the step ending at each point.
        jump_sizes (FloatArray): Jump size on marked steps, zero elsewhere.
        seed (int): Seed the path was drawn with.
    """

    t: FloatArray
    x: FloatArray
    jump_marks: BoolArray
    jump_sizes: FloatArray
    seed: int

    @property
    def p(self) -> np.ndarray:
        """Probability path S(x)."""
        return 1.0 / (1.0 + np.exp(-self.x))

    def to_frame(self) -> pd.DataFrame:
        """Convert the path to its CSV layout."""
        return pd.DataFrame(
            {
                "t": self.t,
                "x": self.x,
                "p": self.p,
                "jump": self.jump_marks.astype(int),
                "jump_size": self.jump_sizes,
            }
        )
