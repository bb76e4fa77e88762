"""The surface module bins calibration estimates on a (tau, m) grid and smooths them.

Layers are tensor-product cubic B-splines on uniform extended knots fitted by penalised
least squares with a second-difference penalty on the coefficient grid. Nonnegative layers
constrain the coefficients to be nonnegative, so the fitted surface is nonnegative
everywhere.
"""
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize
from scipy.interpolate import BSpline, RegularGridInterpolator

from ..config import logger, settings
from ..models import (
    LAYERS,
    BeliefSurface,
    CalibrationSlice,
    EmptySeriesError,
    InsufficientDataError,
    OutOfHullError,
    RankDeficientFitError,
    SurfaceConfig,
    SurfaceGrid,
    SurfaceLayer,
    SurfacePoint,
)
from ..utils import parallel_map, time_elapsed

DEGREE = 3


def _axis_edges(values: np.ndarray, n_bins: int) -> np.ndarray:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, n_bins + 1)


def bin_samples(
    tau: np.ndarray,
    m: np.ndarray,
    values: np.ndarray,
    weights: np.ndarray,
    cfg: SurfaceConfig,
    layer: str = "value",
) -> SurfaceGrid:
    """Weighted binning of scattered samples into (tau, m) cells."""
    tau, m, values, weights = (np.asarray(a, dtype=float).ravel() for a in (tau, m, values, weights))
    keep = np.isfinite(tau) & np.isfinite(m) & np.isfinite(values) & np.isfinite(weights) & (weights > 0)
    if not np.any(keep):
        raise EmptySeriesError(f"{layer} surface grid")
    tau, m, values, weights = tau[keep], m[keep], values[keep], weights[keep]
    tau_edges = _axis_edges(tau, cfg.n_tau_bins)
    m_edges = _axis_edges(m, cfg.n_m_bins)
    i = np.clip(np.searchsorted(tau_edges, tau, side="right") - 1, 0, cfg.n_tau_bins - 1)
    j = np.clip(np.searchsorted(m_edges, m, side="right") - 1, 0, cfg.n_m_bins - 1)
    shape = (cfg.n_tau_bins, cfg.n_m_bins)
    cell_weight = np.zeros(shape)
    cell_sum = np.zeros(shape)
    counts = np.zeros(shape)
    np.add.at(cell_weight, (i, j), weights)
    np.add.at(cell_sum, (i, j), weights * values)
    np.add.at(counts, (i, j), 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cell_values = np.where(cell_weight > 0, cell_sum / cell_weight, np.nan)
    return SurfaceGrid(
        layer=layer,
        tau_axis=0.5 * (tau_edges[1:] + tau_edges[:-1]),
        m_axis=0.5 * (m_edges[1:] + m_edges[:-1]),
        tau_edges=tau_edges,
        m_edges=m_edges,
        values=cell_values,
        weights=cell_weight,
        counts=counts,
        abs_m_quantile=float(np.quantile(np.abs(m), cfg.edge_quantile)),
    )


def bin_estimates(slices: Sequence[CalibrationSlice], layer: str, cfg: SurfaceConfig) -> SurfaceGrid:
    """Bin per-time estimates of one layer from one or more series.

    Each sample carries its filter precision as weight, so a cell's weight is its count
    times the mean precision of its samples and its value is the precision-weighted mean.

    Args:
        slices: Per-series calibration estimates.
        layer: One of "sigma_b", "lambda", "sJ2".
        cfg: Binning settings.

    Returns:
        SurfaceGrid: The binned layer.
    """
    if layer not in LAYERS:
        raise ValueError(f"unknown surface layer {layer!r}")
    if not slices:
        raise EmptySeriesError("surface input")
    for piece in slices:
        if np.any(piece.tau <= 0):
            raise InsufficientDataError("Surface binning (samples with tau > 0)", int(np.sum(piece.tau > 0)), piece.tau.size)
    return bin_samples(
        np.concatenate([piece.tau for piece in slices]),
        np.concatenate([piece.m for piece in slices]),
        np.concatenate([piece.layer(layer) for piece in slices]),
        np.concatenate([piece.precision for piece in slices]),
        cfg,
        layer,
    )


def uniform_knots(lo: float, hi: float, n_basis: int, degree: int = DEGREE) -> np.ndarray:
    """Uniform extended knot vector whose base interval is [lo, hi]."""
    h = (hi - lo) / (n_basis - degree)
    return lo + h * np.arange(-degree, n_basis + 1)


def _basis(knots: np.ndarray, values: np.ndarray, degree: int = DEGREE) -> np.ndarray:
    lo, hi = knots[degree], knots[-degree - 1]
    return BSpline.design_matrix(np.clip(values, lo, hi), knots, degree).toarray()


def _greville(knots: np.ndarray, degree: int = DEGREE) -> np.ndarray:
    n_basis = knots.size - degree - 1
    return np.array([knots[i + 1 : i + degree + 1].mean() for i in range(n_basis)])


def _second_difference(n: int) -> np.ndarray:
    return np.diff(np.eye(n), n=2, axis=0)


def _in_windows(values: np.ndarray, windows: Sequence[Tuple[float, float]]) -> np.ndarray:
    inside = np.zeros(values.shape, dtype=bool)
    for lo, hi in windows:
        inside |= (values >= lo) & (values <= hi)
    return inside


def penalty_root(
    tau_knots: np.ndarray,
    m_knots: Optional[np.ndarray],
    news_windows: Sequence[Tuple[float, float]] = (),
    news_relax: float = 0.1,
    abs_m_quantile: float = np.inf,
    edge_factor: float = 2.0,
) -> np.ndarray:
    """Matrix R with R'R the roughness penalty of the coefficient grid.

    Second differences along tau are down-weighted by `news_relax` where the middle
    coefficient's Greville abscissa lies in a news window; second differences in either
    direction are up-weighted by `edge_factor` where |m| exceeds `abs_m_quantile`.
    """
    g_tau = _greville(tau_knots)
    d_tau = _second_difference(g_tau.size)
    w_tau = np.where(_in_windows(g_tau[1:-1], news_windows), news_relax, 1.0)
    if m_knots is None:
        return np.sqrt(w_tau)[:, None] * d_tau
    g_m = _greville(m_knots)
    edge = np.where(np.abs(g_m) > abs_m_quantile, edge_factor, 1.0)
    d_m = _second_difference(g_m.size)
    rows_tau = np.kron(d_tau, np.eye(g_m.size))
    weights_tau = np.kron(w_tau, edge)
    rows_m = np.kron(np.eye(g_tau.size), d_m)
    weights_m = np.kron(np.ones(g_tau.size), edge[1:-1])
    return np.vstack([np.sqrt(weights_tau)[:, None] * rows_tau, np.sqrt(weights_m)[:, None] * rows_m])


def _design(tau_knots: np.ndarray, m_knots: Optional[np.ndarray], tau: np.ndarray, m: np.ndarray) -> np.ndarray:
    b_tau = _basis(tau_knots, tau)
    if m_knots is None:
        return b_tau
    b_m = _basis(m_knots, m)
    return (b_tau[:, :, None] * b_m[:, None, :]).reshape(tau.size, -1)


def _solve(
    design: np.ndarray,
    values: np.ndarray,
    weights: np.ndarray,
    root: np.ndarray,
    alpha: float,
    nonnegative: bool,
) -> np.ndarray:
    sqrt_w = np.sqrt(weights)
    lhs = np.vstack([sqrt_w[:, None] * design, np.sqrt(alpha) * root])
    rhs = np.concatenate([sqrt_w * values, np.zeros(root.shape[0])])
    rank = np.linalg.matrix_rank(lhs)
    if rank < design.shape[1]:
        raise RankDeficientFitError(int(rank), design.shape[1])
    if nonnegative:
        coefficients, _ = optimize.nnls(lhs, rhs, maxiter=50 * design.shape[1])
        return coefficients
    return np.linalg.lstsq(lhs, rhs, rcond=None)[0]


def gcv_score(design: np.ndarray, values: np.ndarray, weights: np.ndarray, root: np.ndarray, alpha: float) -> Tuple[float, float]:
    """Generalised cross-validation score and effective degrees of freedom of the linear smoother."""
    gram = design.T @ (weights[:, None] * design)
    system = gram + alpha * root.T @ root
    try:
        coefficients = np.linalg.solve(system, design.T @ (weights * values))
        influence = np.linalg.solve(system, gram)
    except np.linalg.LinAlgError:
        return float("inf"), float("nan")
    dof = float(np.trace(influence))
    n = values.size
    rss = float(np.sum(weights * (values - design @ coefficients) ** 2))
    if n - dof <= 1e-9:
        return float("inf"), dof
    return n * rss / (n - dof) ** 2, dof


def _collapse_tau(grid: SurfaceGrid) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    weights = grid.weights.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.nansum(np.nan_to_num(grid.values) * grid.weights, axis=1) / weights
    keep = weights > 0
    return grid.tau_axis[keep], values[keep], weights[keep]


def fit_surface(
    grid: SurfaceGrid,
    alpha: Optional[float] = None,
    news_windows: Sequence[Tuple[float, float]] = (),
    cfg: Optional[SurfaceConfig] = None,
    nonnegative: bool = True,
) -> SurfaceLayer:
    """Penalised tensor-product spline fit of one binned layer.

    Falls back to a one-dimensional fit in tau when fewer than `cfg.min_cells` distinct
    tau or m cells are populated. The penalty weight is chosen by GCV over
    `cfg.alpha_grid` unless fixed. Bands are bootstrap standard errors over cells.

    Args:
        grid: Binned layer.
        alpha: Penalty weight; None uses `cfg.alpha` or GCV.
        news_windows: Tau intervals where the tau penalty is relaxed.
        cfg: Surface settings.
        nonnegative: Constrain the surface to be nonnegative.

    Returns:
        SurfaceLayer: The fitted layer.

    Raises:
        RankDeficientFitError: The data and penalty leave coefficients undetermined.
    """
    cfg = cfg or SurfaceConfig()
    alpha = cfg.alpha if alpha is None else alpha
    populated = grid.populated
    one_d = (
        np.count_nonzero(populated.any(axis=1)) < cfg.min_cells
        or np.count_nonzero(populated.any(axis=0)) < cfg.min_cells
    )
    tau_knots = uniform_knots(grid.tau_edges[0], grid.tau_edges[-1], cfg.n_basis_tau)
    m_knots = uniform_knots(grid.m_edges[0], grid.m_edges[-1], cfg.n_basis_m)
    if one_d:
        logger.info("Layer %s has too few populated cells for a 2-D fit; fitting in tau only.", grid.layer)
        tau, values, weights = _collapse_tau(grid)
        m = np.zeros_like(tau)
        design_m_knots = None
    else:
        tau_mesh, m_mesh = np.meshgrid(grid.tau_axis, grid.m_axis, indexing="ij")
        tau, m = tau_mesh[populated], m_mesh[populated]
        values, weights = grid.values[populated], grid.weights[populated]
        design_m_knots = m_knots
    weights = weights / weights.mean()
    design = _design(tau_knots, design_m_knots, tau, m)
    root = penalty_root(
        tau_knots, design_m_knots, news_windows, cfg.news_relax, grid.abs_m_quantile, cfg.edge_factor
    )

    if alpha is None:
        scores = [gcv_score(design, values, weights, root, candidate) for candidate in cfg.alpha_grid]
        best = int(np.argmin([score for score, _ in scores]))
        alpha = float(cfg.alpha_grid[best])
        gcv, dof = scores[best]
    else:
        gcv, dof = gcv_score(design, values, weights, root, alpha)
    coefficients = _solve(design, values, weights, root, alpha, nonnegative)

    band_m = grid.m_axis if not one_d else np.array([0.5 * (grid.m_edges[0] + grid.m_edges[-1])])
    band_tau_mesh, band_m_mesh = np.meshgrid(grid.tau_axis, band_m, indexing="ij")
    band_design = _design(tau_knots, design_m_knots, band_tau_mesh.ravel(), band_m_mesh.ravel())
    band = _bootstrap_band(design, values, weights, root, alpha, nonnegative, band_design, cfg)

    return SurfaceLayer(
        name=grid.layer,
        coefficients=coefficients if one_d else coefficients.reshape(cfg.n_basis_tau, cfg.n_basis_m),
        tau_knots=tau_knots,
        m_knots=m_knots,
        degree=DEGREE,
        link="squared" if nonnegative else "identity",
        alpha=alpha,
        gcv=gcv,
        effective_dof=dof,
        one_dimensional=one_d,
        band_tau=grid.tau_axis,
        band_m=band_m,
        band=band.reshape(band_tau_mesh.shape),
        tau_bounds=(float(grid.tau_edges[0]), float(grid.tau_edges[-1])),
        m_bounds=(float(grid.m_edges[0]), float(grid.m_edges[-1])),
    )


def _bootstrap_band(
    design: np.ndarray,
    values: np.ndarray,
    weights: np.ndarray,
    root: np.ndarray,
    alpha: float,
    nonnegative: bool,
    band_design: np.ndarray,
    cfg: SurfaceConfig,
) -> np.ndarray:
    """Pointwise standard error of the fit over cell resamples."""
    if cfg.n_bootstrap < 2:
        return np.zeros(band_design.shape[0])
    rng = np.random.default_rng(cfg.bootstrap_seed)
    fits = []
    for _ in range(cfg.n_bootstrap):
        picks = rng.integers(0, values.size, size=values.size)
        multiplicity = np.bincount(picks, minlength=values.size).astype(float)
        try:
            coefficients = _solve(design, values, weights * multiplicity, root, alpha, nonnegative)
        except RankDeficientFitError:
            continue
        fits.append(band_design @ coefficients)
    if len(fits) < 2:
        logger.warning("Bootstrap produced fewer than two usable resamples; bands set to zero.")
        return np.zeros(band_design.shape[0])
    return np.std(np.asarray(fits), axis=0, ddof=1)


def roughness(layer: SurfaceLayer, root: Optional[np.ndarray] = None) -> float:
    """Penalty |R c|^2 of a fitted layer; R defaults to the unweighted second differences."""
    if root is None:
        root = penalty_root(layer.tau_knots, None if layer.one_dimensional else layer.m_knots)
    return float(np.sum((root @ np.ravel(layer.coefficients)) ** 2))


def _check_hull(layer: SurfaceLayer, tau: np.ndarray, m: np.ndarray) -> None:
    (t_lo, t_hi), (m_lo, m_hi) = layer.tau_bounds, layer.m_bounds
    tol = 1e-9 * max(1.0, abs(t_hi), abs(m_hi))
    outside = (tau < t_lo - tol) | (tau > t_hi + tol) | (m < m_lo - tol) | (m > m_hi + tol)
    if np.any(outside):
        k = int(np.argmax(outside))
        raise OutOfHullError(float(tau.flat[k]), float(m.flat[k]), layer.tau_bounds, layer.m_bounds)


def evaluate_layer(layer: SurfaceLayer, tau, m) -> np.ndarray:
    """Evaluate a fitted layer; queries outside the knot hull are refused."""
    tau, m = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(m, dtype=float))
    _check_hull(layer, tau, m)
    design = _design(layer.tau_knots, None if layer.one_dimensional else layer.m_knots, tau.ravel(), m.ravel())
    values = design @ np.ravel(layer.coefficients)
    if layer.link == "squared":
        values = np.maximum(values, 0.0)
    return values.reshape(tau.shape)


def evaluate_band(layer: SurfaceLayer, tau, m) -> np.ndarray:
    """Interpolate the bootstrap band of a layer."""
    tau, m = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(m, dtype=float))
    _check_hull(layer, tau, m)
    tau_axis = layer.band_tau
    if layer.one_dimensional or layer.band_m.size < 2:
        return np.interp(tau, tau_axis, layer.band[:, 0])
    interpolator = RegularGridInterpolator((tau_axis, layer.band_m), layer.band, bounds_error=False, fill_value=None)
    points = np.column_stack([tau.ravel(), m.ravel()])
    return np.maximum(interpolator(points), 0.0).reshape(tau.shape)


def evaluate(surface: BeliefSurface, tau: float, m: float) -> SurfacePoint:
    """Evaluate every layer of a surface at one (tau, m) point.

    Raises:
        OutOfHullError: The point is outside a layer's knot hull.
    """
    values = {name: float(evaluate_layer(surface[name], tau, m)) for name in LAYERS}
    band = {name: float(evaluate_band(surface[name], tau, m)) for name in LAYERS}
    return SurfacePoint(tau=tau, m=m, sigma_b=values["sigma_b"], lam=values["lambda"], sJ2=values["sJ2"], band=band)


def build_surface(
    slices: Sequence[CalibrationSlice],
    cfg: SurfaceConfig,
    news_windows: Sequence[Tuple[float, float]] = (),
) -> BeliefSurface:
    """Bin and fit the sigma_b, lambda and sJ2 layers in parallel."""
    start = time.perf_counter()

    def _fit(name: str) -> SurfaceLayer:
        return fit_surface(bin_estimates(slices, name, cfg), news_windows=news_windows, cfg=cfg)

    layers = parallel_map(_fit, LAYERS, settings.BELIEFKIT_MAX_WORKERS)
    logger.info("Fitted %d surface layers in %ss.", len(layers), time_elapsed(start))
    return BeliefSurface(layers=layers, news_windows=list(news_windows))


def surface_frame(surface: BeliefSurface, n_tau: int = 40, n_m: int = 30) -> pd.DataFrame:
    """Gridded export of every layer and band over the common hull."""
    tau_lo = max(surface[name].tau_bounds[0] for name in LAYERS)
    tau_hi = min(surface[name].tau_bounds[1] for name in LAYERS)
    m_lo = max(surface[name].m_bounds[0] for name in LAYERS)
    m_hi = min(surface[name].m_bounds[1] for name in LAYERS)
    tau_axis = np.linspace(tau_lo, tau_hi, n_tau)
    m_axis = np.linspace(m_lo, m_hi, n_m)
    tau, m = (a.ravel() for a in np.meshgrid(tau_axis, m_axis, indexing="ij"))
    columns: Dict[str, np.ndarray] = {"tau": tau, "m": m}
    for name in LAYERS:
        columns[name] = evaluate_layer(surface[name], tau, m)
        columns[f"{name}_band"] = evaluate_band(surface[name], tau, m)
    return pd.DataFrame(columns)


def news_windows_in_tau(centres: Sequence[float], width: float, resolution_time: float) -> List[Tuple[float, float]]:
    """Convert announced window centres in clock time to tau intervals."""
    return [(resolution_time - c - width, resolution_time - c + width) for c in centres]
