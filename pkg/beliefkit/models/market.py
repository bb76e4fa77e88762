"""The market.py file defines the data models for raw quotes and the filtered series."""
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import Field, model_validator

from .base import BaseModel, BoolArray, FloatArray


class TickFlag(Enum):
    """An enumeration of the flags a tick can carry."""

    HALT = "halt"
    CROSSED = "crossed"
    LOCKED = "locked"

    @staticmethod
    def schema() -> Dict[str, Any]:
        """Get the schema for the tick flag enum.

        Returns:
            Dict[str, Any]: The schema for the tick flag enum.
        """
        return {"type": "string", "enum": [flag.value for flag in TickFlag]}

    @staticmethod
    def parse(tokens: Optional[str]) -> FrozenSet["TickFlag"]:
        """Parse a pipe-separated flag field."""
        if tokens is None or (isinstance(tokens, float) and np.isnan(tokens)):
            return frozenset()
        return frozenset(TickFlag(token.strip().lower()) for token in str(tokens).split("|") if token.strip())


TICK_COLUMNS = ["ts_ms", "bid", "ask", "trade_px", "trade_sz", "flags"]


class TickRecord(BaseModel):
    """The TickRecord class defines one quote or trade update.

    Attributes:
        ts (int): Timestamp in milliseconds.
        bid (float): Best bid probability.
        ask (float): Best ask probability.
        trade_px (float): Trade price, if the update carries a trade.
        trade_sz (float): Trade size, if the update carries a trade.
        depth (float): Displayed depth at the touch, if known.
        flags (FrozenSet[TickFlag]): Halt/crossed/locked markers.
    """

    ts: int
    bid: float
    ask: float
    trade_px: Optional[float] = None
    trade_sz: Optional[float] = None
    depth: Optional[float] = None
    flags: FrozenSet[TickFlag] = frozenset()

    @model_validator(mode="after")
    def _check_book(self) -> "TickRecord":
        if TickFlag.CROSSED in self.flags or TickFlag.LOCKED in self.flags:
            return self
        if not 0.0 <= self.bid <= self.ask <= 1.0:
            raise ValueError(f"unflagged tick must satisfy 0 <= bid <= ask <= 1, got {self.bid}, {self.ask}")
        return self

    @staticmethod
    def to_frame(ticks: Sequence["TickRecord"]) -> pd.DataFrame:
        """Convert a sequence of ticks to the tick CSV layout."""
        return pd.DataFrame(
            {
                "ts_ms": [tick.ts for tick in ticks],
                "bid": [tick.bid for tick in ticks],
                "ask": [tick.ask for tick in ticks],
                "trade_px": [np.nan if tick.trade_px is None else tick.trade_px for tick in ticks],
                "trade_sz": [np.nan if tick.trade_sz is None else tick.trade_sz for tick in ticks],
                "depth": [np.nan if tick.depth is None else tick.depth for tick in ticks],
                "flags": ["|".join(sorted(flag.value for flag in tick.flags)) for tick in ticks],
            }
        )


class UniformSeries(BaseModel):
    """The UniformSeries class defines the uniform-grid observed logit series.

    Attributes:
        t (FloatArray): Grid times in seconds from the first bin.
        p_tilde (FloatArray): Clamped canonical mid.
        y (FloatArray): Observed logit, logit(p_tilde).
        spread (FloatArray): Mean quoted spread per bin.
        inv_depth (FloatArray): Inverse displayed depth per bin.
        trade_rate (FloatArray): Trades per second per bin.
        imbalance (FloatArray): Signed aggressor imbalance per bin in [-1, 1].
        halted (BoolArray): Bins with a halt and no tradable quote.
        dt (float): Bin width in seconds.
        t0_ms (int): Timestamp of the first bin.
    """

    t: FloatArray
    p_tilde: FloatArray
    y: FloatArray
    spread: FloatArray
    inv_depth: FloatArray
    trade_rate: FloatArray
    imbalance: FloatArray
    halted: BoolArray
    dt: float = 1.0
    t0_ms: int = 0

    def __len__(self) -> int:
        return int(self.y.size)

    def covariates(self) -> np.ndarray:
        """Return the noise-model design columns [s^2, 1/d, r, iota^2]."""
        return np.column_stack([self.spread**2, self.inv_depth, self.trade_rate, self.imbalance**2])

    @classmethod
    def from_logit(cls, y: np.ndarray, dt: float = 1.0, spread: Optional[np.ndarray] = None) -> "UniformSeries":
        """Build a series directly from observed logits with empty covariates."""
        y = np.asarray(y, dtype=float)
        zeros = np.zeros_like(y)
        return cls(
            t=np.arange(y.size) * dt,
            p_tilde=1.0 / (1.0 + np.exp(-y)),
            y=y,
            spread=zeros if spread is None else np.asarray(spread, dtype=float),
            inv_depth=zeros,
            trade_rate=zeros,
            imbalance=zeros,
            halted=np.zeros(y.size, dtype=bool),
            dt=dt,
        )


class NoiseModelCoeffs(BaseModel):
    """The NoiseModelCoeffs class defines the heteroskedastic measurement-noise model.

    Attributes:
        a (List[float]): Coefficients a0..a4 for [1, s^2, 1/d, r, iota^2].
        clamp_lo (float): Lower clip of the predicted variance.
        clamp_hi (float): Upper clip of the predicted variance.
    """

    a: List[float] = Field(default_factory=lambda: [1e-3, 0.0, 0.0, 0.0, 0.0])
    clamp_lo: float = 1e-6
    clamp_hi: float = 4.0

    @model_validator(mode="after")
    def _check_clamps(self) -> "NoiseModelCoeffs":
        if len(self.a) != 5:
            raise ValueError("the noise model has exactly five coefficients a0..a4")
        if not 0.0 < self.clamp_lo < self.clamp_hi:
            raise ValueError("noise clamps must satisfy 0 < clamp_lo < clamp_hi")
        return self


class FilterOutput(BaseModel):
    """The FilterOutput class defines the result of a Kalman filter and smoother pass.

    Attributes:
        x_hat (FloatArray): Smoothed logit per step.
        var_hat (FloatArray): Smoothed posterior variance per step.
        x_filter (FloatArray): Forward-filter logit per step.
        var_filter (FloatArray): Forward-filter posterior variance per step.
        innovations (FloatArray): One-step-ahead residuals (NaN on halted steps).
        innovation_var (FloatArray): Predicted innovation variances.
        loglik (float): Gaussian log-likelihood of the innovations.
        y (FloatArray): Observations the pass ran on.
        meas_var (FloatArray): Measurement variance per step.
        proc_var (FloatArray): Process variance per step.
        halted (BoolArray): Halted steps.
        dt (float): Step in seconds.
    """

    x_hat: FloatArray
    var_hat: FloatArray
    x_filter: FloatArray
    var_filter: FloatArray
    innovations: FloatArray
    innovation_var: FloatArray
    loglik: float
    y: FloatArray
    meas_var: FloatArray
    proc_var: FloatArray
    halted: BoolArray
    dt: float = 1.0

    def path(self, smoothed: bool = True) -> np.ndarray:
        """Return the smoothed or forward-filter path."""
        return self.x_hat if smoothed else self.x_filter

    def variance(self, smoothed: bool = True) -> np.ndarray:
        """Return the smoothed or forward-filter posterior variance."""
        return self.var_hat if smoothed else self.var_filter


class DiagnosticsReport(BaseModel):
    """The DiagnosticsReport class defines innovation diagnostics of a filter pass."""

    n: int
    ljung_box: Dict[int, float]
    ljung_box_pvalue: Dict[int, float]
    ljung_box_pass: bool
    variance_ratio: float
    variance_ratio_pass: bool
    excess_kurtosis: float
    kurtosis_pass: bool
    degenerate_variance: bool = False

    @property
    def passed(self) -> bool:
        """Whether every diagnostic passed."""
        return self.ljung_box_pass and self.variance_ratio_pass and self.kurtosis_pass
