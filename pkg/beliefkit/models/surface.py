"""The surface.py file defines the data models of the smoothed belief surfaces."""
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import Field, model_validator

from .base import BaseModel, ConfigModel, FloatArray

LAYERS = ("sigma_b", "lambda", "sJ2")


class SurfaceConfig(ConfigModel):
    """The SurfaceConfig class defines the binning and smoothing settings.

    Attributes:
        n_tau_bins (int): Cells along time-to-resolution.
        n_m_bins (int): Cells along moneyness.
        n_basis_tau (int): Cubic B-spline basis functions along tau.
        n_basis_m (int): Cubic B-spline basis functions along m.
        alpha (float): Fixed penalty weight; None selects it by GCV.
        alpha_grid (List[float]): Candidate penalty weights for GCV.
        n_bootstrap (int): Cell resamples for the uncertainty bands.
        bootstrap_seed (int): Seed of the bootstrap.
        news_relax (float): Tau-penalty factor inside news windows.
        edge_factor (float): Curvature-penalty factor at extreme moneyness.
        edge_quantile (float): Quantile of |m| beyond which the edge factor applies.
        min_cells (int): Populated cells needed per axis for a 2-D fit.
        resolution_time (float): Resolution time in seconds; None uses the series end.
    """

    n_tau_bins: int = 24
    n_m_bins: int = 18
    n_basis_tau: int = 12
    n_basis_m: int = 9
    alpha: Optional[float] = None
    alpha_grid: List[float] = Field(default_factory=lambda: np.logspace(-4, 4, 17).tolist())
    n_bootstrap: int = 200
    bootstrap_seed: int = 0
    news_relax: float = 0.1
    edge_factor: float = 2.0
    edge_quantile: float = 0.9
    min_cells: int = 4
    resolution_time: Optional[float] = None

    @model_validator(mode="after")
    def _check_counts(self) -> "SurfaceConfig":
        if min(self.n_basis_tau, self.n_basis_m) < 4:
            raise ValueError("cubic splines need at least 4 basis functions per axis")
        if min(self.n_tau_bins, self.n_m_bins) < 2:
            raise ValueError("the binning grid needs at least 2 cells per axis")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        return self


class CalibrationSlice(BaseModel):
    """The CalibrationSlice class defines one series' per-time estimates for binning.

    Attributes:
        t (FloatArray): Sample times in seconds.
        m (FloatArray): Moneyness per sample (filtered logit).
        precision (FloatArray): Inverse posterior variance of the filter per sample.
        sigma_b2 (FloatArray): Diffusive variance estimate per sample.
        lam (FloatArray): Jump intensity estimate per sample.
        sJ2 (FloatArray): Jump second moment estimate per sample.
        resolution_time (float): Resolution time T of the series.
    """

    t: FloatArray
    m: FloatArray
    precision: FloatArray
    sigma_b2: FloatArray
    lam: FloatArray
    sJ2: FloatArray
    resolution_time: float

    @property
    def tau(self) -> np.ndarray:
        """Time to resolution per sample."""
        return self.resolution_time - self.t

    def layer(self, name: str) -> np.ndarray:
        """Values of one surface layer per sample."""
        if name == "sigma_b":
            return np.sqrt(np.maximum(self.sigma_b2, 0.0))
        if name == "lambda":
            return self.lam
        if name == "sJ2":
            return self.sJ2
        raise ValueError(f"unknown surface layer {name!r}")


class SurfaceGrid(BaseModel):
    """The SurfaceGrid class defines binned estimates on a (tau, m) grid.

    Attributes:
        layer (str): Name of the binned layer.
        tau_axis (FloatArray): Cell centres along time-to-resolution.
        m_axis (FloatArray): Cell centres along moneyness.
        tau_edges (FloatArray): Cell edges along time-to-resolution.
        m_edges (FloatArray): Cell edges along moneyness.
        values (FloatArray): Weighted cell means, NaN where empty.
        weights (FloatArray): Cell weights, count times mean precision.
        counts (FloatArray): Samples per cell.
        abs_m_quantile (float): Quantile of observed |m| used by the edge penalty.
    """

    layer: str
    tau_axis: FloatArray
    m_axis: FloatArray
    tau_edges: FloatArray
    m_edges: FloatArray
    values: FloatArray
    weights: FloatArray
    counts: FloatArray
    abs_m_quantile: float = np.inf

    @model_validator(mode="after")
    def _check_grid(self) -> "SurfaceGrid":
        if np.any(np.diff(self.tau_axis) <= 0) or np.any(np.diff(self.m_axis) <= 0):
            raise ValueError("surface axes must be strictly increasing")
        if self.values.shape != (self.tau_axis.size, self.m_axis.size):
            raise ValueError("values must have shape (len(tau_axis), len(m_axis))")
        if np.any(self.weights < 0):
            raise ValueError("cell weights must be nonnegative")
        if not np.all(np.isfinite(self.values[self.weights > 0])):
            raise ValueError("values must be finite wherever the weight is positive")
        return self

    @property
    def populated(self) -> np.ndarray:
        """Cells carrying positive weight."""
        return self.weights > 0

    def to_frame(self) -> pd.DataFrame:
        """Long-format frame of the populated cells."""
        tau, m = np.meshgrid(self.tau_axis, self.m_axis, indexing="ij")
        mask = self.populated
        return pd.DataFrame(
            {"tau": tau[mask], "m": m[mask], "value": self.values[mask], "weight": self.weights[mask]}
        )


class SurfaceLayer(BaseModel):
    """The SurfaceLayer class defines one fitted tensor-product spline layer.

    Attributes:
        name (str): Layer name.
        coefficients (FloatArray): Spline coefficients, shape (n_basis_tau, n_basis_m).
        tau_knots (FloatArray): Full knot vector along tau.
        m_knots (FloatArray): Full knot vector along m (unused for 1-D fits).
        degree (int): Spline degree.
        link (str): "squared" for nonnegative layers, "identity" for signed ones.
        alpha (float): Penalty weight used.
        gcv (float): GCV score at alpha.
        effective_dof (float): Trace of the unconstrained hat matrix.
        one_dimensional (bool): Whether the layer only depends on tau.
        band_tau (FloatArray): Tau axis of the band grid.
        band_m (FloatArray): M axis of the band grid.
        band (FloatArray): Bootstrap standard error on the band grid.
        tau_bounds (Tuple[float, float]): Evaluation hull along tau.
        m_bounds (Tuple[float, float]): Evaluation hull along m.
    """

    name: str
    coefficients: FloatArray
    tau_knots: FloatArray
    m_knots: FloatArray
    degree: int = 3
    link: str = "squared"
    alpha: float
    gcv: float = float("nan")
    effective_dof: float = float("nan")
    one_dimensional: bool = False
    band_tau: FloatArray
    band_m: FloatArray
    band: FloatArray
    tau_bounds: Tuple[float, float]
    m_bounds: Tuple[float, float]


class BeliefSurface(BaseModel):
    """The BeliefSurface class defines the smoothed sigma_b, lambda and sJ2 layers.

    Attributes:
        layers (Dict[str, SurfaceLayer]): Fitted layers keyed by name.
        news_windows (List[Tuple[float, float]]): Tau intervals with a relaxed penalty.
    """

    layers: Dict[str, SurfaceLayer]
    news_windows: List[Tuple[float, float]] = Field(default_factory=list)

    def __getitem__(self, name: str) -> SurfaceLayer:
        return self.layers[name]


class SurfacePoint(BaseModel):
    """The SurfacePoint class defines the surface values at one (tau, m) query."""

    tau: float
    m: float
    sigma_b: float
    lam: float
    sJ2: float
    band: Dict[str, float]
