"""The calibration.py file defines the data models of the EM jump/diffusion separation."""
from typing import List

import numpy as np
import pandas as pd
from pydantic import Field, model_validator

from .base import BaseModel, ConfigModel, FloatArray, IntArray
from .kernel import JumpFamily, JumpLaw
from .market import FilterOutput


class EmConfig(ConfigModel):
    """The EmConfig class defines the EM calibration settings.

    Attributes:
        dt (float): Step in seconds.
        global_steps (int): EM iterations of the whole-series initialisation.
        rolling_window (float): Rolling window length in seconds.
        rolling_steps (int): EM iterations per rolling pass.
        tau_J (float): Responsibility threshold for jump flags.
        outer_loops (int): Maximum drift/re-filter loops.
        tol (float): Relative parameter-change tolerance.
        family (JumpFamily): Jump family fitted in the M-step.
        drift_half_life (float): EWMA half-life of the RN drift in seconds.
        lambda_floor (float): Intensity floor used inside the E-step (per second).
        causal (bool): Use trailing windows and the forward filter only.
        min_jump_ratio (float): Smallest jump second moment in the rolling EM, as a multiple
            of the diffusive step variance.
        jump_test (bool): Drop the jump component when the whole-series fit does not pass
            the BIC check.
    """

    dt: float = 1.0
    global_steps: int = 6
    rolling_window: float = 400.0
    rolling_steps: int = 3
    tau_J: float = 0.7
    outer_loops: int = 2
    tol: float = 1e-3
    family: JumpFamily = JumpFamily.GAUSSIAN
    drift_half_life: float = 30.0
    lambda_floor: float = 1e-7
    causal: bool = False
    min_jump_ratio: float = 9.0
    jump_test: bool = True

    @model_validator(mode="after")
    def _check_values(self) -> "EmConfig":
        if min(self.dt, self.global_steps, self.rolling_window, self.outer_loops, self.tol) <= 0:
            raise ValueError("EM settings must be positive")
        if not 0.5 < self.tau_J < 1.0:
            raise ValueError(f"tau_J must lie in (0.5, 1), got {self.tau_J}")
        return self

    @property
    def window_steps(self) -> int:
        """Rolling window length in steps."""
        return int(round(self.rolling_window / self.dt))


class MixtureEstimates(BaseModel):
    """The MixtureEstimates class defines per-step and per-window mixture parameters.

    Per-step arrays are indexed by increment (step u covers x_u to x_{u+1}); causal
    estimates are NaN until the first window completes.

    Attributes:
        sigma_b2 (FloatArray): Diffusive variance per step (logit^2 / s).
        lam (FloatArray): Jump intensity per step (1 / s).
        sJ2 (FloatArray): Jump second moment per step (logit^2).
        law_index (IntArray): Window whose jump law applies at each step (-1 if none).
        window_starts (List[int]): First increment of each window.
        window_ends (List[int]): One past the last increment of each window.
        window_sigma_b2 (FloatArray): Diffusive variance per window.
        window_lam (FloatArray): Jump intensity per window.
        window_sJ2 (FloatArray): Jump second moment per window.
        jump_laws (List[JumpLaw]): Fitted jump law per window.
        family (JumpFamily): Jump family.
        dt (float): Step in seconds.
    """

    sigma_b2: FloatArray
    lam: FloatArray
    sJ2: FloatArray
    law_index: IntArray
    window_starts: List[int]
    window_ends: List[int]
    window_sigma_b2: FloatArray
    window_lam: FloatArray
    window_sJ2: FloatArray
    jump_laws: List[JumpLaw]
    family: JumpFamily = JumpFamily.GAUSSIAN
    dt: float = 1.0

    def __len__(self) -> int:
        return int(self.sigma_b2.size)

    @property
    def valid(self) -> np.ndarray:
        """Steps that carry an estimate."""
        return np.isfinite(self.sigma_b2) & np.isfinite(self.lam) & np.isfinite(self.sJ2)

    def jump_logpdf(self, dx: np.ndarray) -> np.ndarray:
        """Log jump density of each increment under the step's own law."""
        dx = np.asarray(dx, dtype=float)
        if self.family is JumpFamily.GAUSSIAN:
            sd = np.sqrt(np.maximum(self.sJ2, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                out = -0.5 * np.log(2.0 * np.pi * sd**2) - 0.5 * (dx / sd) ** 2
            return np.where(sd > 0, out, -np.inf)
        out = np.full(dx.shape, -np.inf)
        for window, law in enumerate(self.jump_laws):
            mask = self.law_index == window
            if np.any(mask):
                out[mask] = law.logpdf(dx[mask])
        return out

    def relative_change(self, other: "MixtureEstimates") -> float:
        """Largest L1 change of the diffusive and jump variance streams against another estimate.

        Both changes are relative to the total variance stream of `other`.
        """
        both = self.valid & other.valid
        if not np.any(both):
            return float("inf")
        scale = np.sum(np.abs(other.sigma_b2[both] + other.lam[both] * other.sJ2[both]))
        diffusive = np.sum(np.abs(self.sigma_b2[both] - other.sigma_b2[both]))
        jump = np.sum(np.abs(self.lam[both] * self.sJ2[both] - other.lam[both] * other.sJ2[both]))
        if diffusive == 0.0 and jump == 0.0:
            return 0.0
        return float(max(diffusive, jump) / max(scale, 1e-300))


class Responsibilities(BaseModel):
    """The Responsibilities class defines posterior jump probabilities per step.

    Attributes:
        gamma (FloatArray): Posterior jump probability per increment.
        tau_J (float): Flag threshold.
        loglik (float): Observed-data log-likelihood of the mixture.
        degenerate_count (int): Steps where both densities vanished.
    """

    gamma: FloatArray
    tau_J: float = 0.7
    loglik: float = 0.0
    degenerate_count: int = 0

    @property
    def jump_flags(self) -> np.ndarray:
        """Jump flags, gamma > tau_J."""
        return self.gamma > self.tau_J


class SanityReport(BaseModel):
    """The SanityReport class compares realized and model-implied probability variance."""

    realized_p_variance: float
    model_p_variance: float
    ratio: float
    converged: bool
    outer_loops_used: int
    max_relative_change: float
    n_flagged_jumps: int


class CalibrationResult(BaseModel):
    """The CalibrationResult class bundles the outputs of a calibration run."""

    estimates: MixtureEstimates
    responsibilities: Responsibilities
    drift: FloatArray
    filter_out: FilterOutput
    sanity: SanityReport
    history: List[float] = Field(default_factory=list)
    loglik_trace: List[float] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        """Convert the per-step streams to the calibration CSV layout.

        The per-increment streams are aligned to the time at the end of the increment;
        the first grid point carries NaN estimates.
        """
        pad = np.array([np.nan])
        n = self.filter_out.y.size
        return pd.DataFrame(
            {
                "t": np.arange(n) * self.filter_out.dt,
                "sigma_b2": np.concatenate([pad, self.estimates.sigma_b2]),
                "lambda": np.concatenate([pad, self.estimates.lam]),
                "sJ2": np.concatenate([pad, self.estimates.sJ2]),
                "gamma": np.concatenate([[0.0], self.responsibilities.gamma]),
                "mu": np.concatenate([self.drift, pad]),
            }
        )
