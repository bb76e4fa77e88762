"""The dependence.py file defines the data models of the cross-event dependence layer."""
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import Field, model_validator

from .base import BaseModel, ConfigModel, FloatArray


class DependenceConfig(ConfigModel):
    """The DependenceConfig class defines the pair dependence settings.

    Attributes:
        window (int): Rolling window in steps.
        min_valid (int): Non-jump steps needed inside a window for an estimate.
        tau_J (float): Jump flag threshold on the responsibilities.
        lag_tolerance (int): Steps of misalignment allowed for joint jump flags.
        shrinkage_alpha (float): Hedge-ratio shrinkage.
        clamp_abs (float): Absolute hedge-ratio clamp.
        sprime_floor (float): Floor applied to S' of the hedge leg.
        vol_scaled (bool): Scale the hedge ratio by the volatility ratio.
        pairs (List[str]): Other calibrated run directories to pair with.
    """

    window: int = 300
    min_valid: int = 30
    tau_J: float = 0.7
    lag_tolerance: int = 0
    shrinkage_alpha: float = 0.7
    clamp_abs: float = 10.0
    sprime_floor: float = 1e-4
    vol_scaled: bool = False
    pairs: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_values(self) -> "DependenceConfig":
        if self.window < 60:
            raise ValueError(f"window must cover at least 60 steps, got {self.window}")
        if not 0.5 <= self.shrinkage_alpha <= 1.0:
            raise ValueError("shrinkage_alpha must lie in [0.5, 1]")
        if self.clamp_abs <= 0 or self.lag_tolerance < 0:
            raise ValueError("clamp_abs must be positive and lag_tolerance nonnegative")
        return self


class PairDependence(BaseModel):
    """The PairDependence class defines the dependence estimates of one event pair.

    Attributes:
        t (FloatArray): Times of the rolling correlation.
        rho (FloatArray): Rolling de-jumped correlation, NaN where undefined.
        cojump_intensity (float): Joint jump intensity (1/s).
        cojump_m2 (float): Mean product of joint jump increments in p.
        n_joint (int): Jointly flagged steps.
        window (float): Rolling window in seconds.
    """

    t: FloatArray
    rho: FloatArray
    cojump_intensity: float = 0.0
    cojump_m2: float = 0.0
    n_joint: int = 0
    window: float

    @model_validator(mode="after")
    def _check_bounds(self) -> "PairDependence":
        finite = self.rho[np.isfinite(self.rho)]
        if np.any(np.abs(finite) > 1.0) or self.cojump_intensity < 0:
            raise ValueError("rho must lie in [-1, 1] and the co-jump intensity must be nonnegative")
        return self

    @property
    def rho_latest(self) -> float:
        """Last defined correlation, 0 if none."""
        finite = self.rho[np.isfinite(self.rho)]
        return float(finite[-1]) if finite.size else 0.0

    def to_frame(self) -> pd.DataFrame:
        """Convert the rolling correlation to its CSV layout."""
        return pd.DataFrame({"t": self.t, "rho": self.rho})

    def summary(self) -> dict:
        """Summary without the rolling series."""
        return {
            "cojump_intensity": self.cojump_intensity,
            "cojump_m2": self.cojump_m2,
            "n_joint": self.n_joint,
            "window": self.window,
            "rho_mean": float(np.nanmean(self.rho)) if np.any(np.isfinite(self.rho)) else None,
        }


class PairState(BaseModel):
    """The PairState class defines the instantaneous state of a two-event book.

    Attributes:
        x_i (float): Logit of the hedged event.
        x_j (float): Logit of the hedge event.
        sigma_i (float): Belief volatility of event i.
        sigma_j (float): Belief volatility of event j.
        rho (float): Diffusive correlation.
    """

    x_i: float
    x_j: float
    sigma_i: float
    sigma_j: float
    rho: float


class HedgeRatio(BaseModel):
    """The HedgeRatio class defines a cross-event hedge ratio.

    Attributes:
        beta (float): Raw instantaneous hedge ratio.
        shrinkage_alpha (float): Shrinkage applied to beta.
        clamp_abs (float): Absolute clamp.
        jump_correction (float): Co-jump correction added after shrinkage.
        beta_effective (float): Shrunk, corrected and clamped ratio.
    """

    beta: float
    shrinkage_alpha: float
    clamp_abs: float
    jump_correction: float = 0.0
    beta_effective: float

    @model_validator(mode="after")
    def _check_clamp(self) -> "HedgeRatio":
        if abs(self.beta_effective) > self.clamp_abs:
            raise ValueError("beta_effective exceeds clamp_abs")
        return self


class PairResult(BaseModel):
    """Dependence output of one pair as written by the calibrate command."""

    name: str
    dependence: PairDependence
    hedge: Optional[HedgeRatio] = None
