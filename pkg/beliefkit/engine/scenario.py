"""The scenario module synthesises the event-contract path, noisy quotes and news schedule."""
from typing import List, NamedTuple

import numpy as np
import pandas as pd

from ..config import logger
from ..models import KernelParams, LogitPath, ScenarioConfig, ScheduleWindow, TickRecord
from .kernel import X_CLAMP, sigmoid, simulate_ensemble, simulate_path

TRADE_PROBABILITY = 0.5


class Scenario(NamedTuple):
    """A synthetic scenario: truth, observations and what generated them."""

    path: LogitPath
    y: np.ndarray
    meas_var: np.ndarray
    regime: np.ndarray
    schedule: List[ScheduleWindow]
    intensity_mult: np.ndarray
    params: KernelParams
    ticks: pd.DataFrame


def intensity_schedule(t: np.ndarray, schedule: List[ScheduleWindow], peak: float) -> np.ndarray:
    """Jump-intensity multiplier: 1 plus a Gaussian bump of height `peak` per announced window."""
    mult = np.ones_like(t, dtype=float)
    for window in schedule:
        mult += peak * np.exp(-0.5 * ((t - window.center) / window.width) ** 2)
    return mult


def noise_regime(t: np.ndarray, regime_length: float) -> np.ndarray:
    """Index of the observation-noise regime, alternating every `regime_length` seconds."""
    return (np.floor(np.asarray(t) / regime_length).astype(int) % 2).astype(int)


def scenario_params(cfg: ScenarioConfig, seed: int = 0) -> KernelParams:
    """Kernel grids of the scenario: baseline volatility with the breakout segment raised."""
    t = np.arange(cfg.n_steps) * cfg.dt
    sigma = np.full(cfg.n_steps, cfg.kernel.sigma_b)
    lo, hi = cfg.breakout
    sigma[(t >= lo) & (t < hi)] = cfg.breakout_sigma
    lam = np.full(cfg.n_steps, cfg.kernel.lam)
    return cfg.kernel.to_params(dt=cfg.dt, sigma_grid=sigma, lam_grid=lam, seed=seed)


def _terminal_path(cfg: ScenarioConfig, params: KernelParams, mult: np.ndarray, seeds: np.ndarray) -> LogitPath:
    """Simulate n_steps grid points; the last `terminal_window` seconds glide toward +-terminal_target."""
    n_terminal = int(round(cfg.terminal_window / cfg.dt)) if cfg.terminal_drift else 0
    n_increments = cfg.n_steps - 1
    n_terminal = max(min(n_terminal, n_increments - 1), 0)
    n_head = n_increments - n_terminal
    head = simulate_path(params, cfg.p0, n_head, seed=int(seeds[0]), schedule=mult[:n_head])
    if n_terminal == 0:
        return head
    x_end = float(head.x[-1])
    target = np.sign(x_end) * cfg.terminal_target if x_end != 0 else cfg.terminal_target
    overlay = np.full(n_terminal, (target - x_end) / cfg.terminal_window)
    x, marks, sizes = simulate_ensemble(
        params,
        float(sigmoid(x_end)),
        n_terminal,
        1,
        int(seeds[1]),
        start_step=n_head,
        schedule=mult[n_head:],
        drift_overlay=overlay,
    )
    return LogitPath(
        t=np.arange(cfg.n_steps) * cfg.dt,
        x=np.concatenate([head.x, x[0, 1:]]),
        jump_marks=np.concatenate([head.jump_marks, marks[0, 1:]]),
        jump_sizes=np.concatenate([head.jump_sizes, sizes[0, 1:]]),
        seed=head.seed,
    )


def synth_ticks(
    t: np.ndarray,
    y: np.ndarray,
    regime: np.ndarray,
    cfg: ScenarioConfig,
    rng: np.random.Generator,
) -> pd.DataFrame:
    """Quotes around S(y) with regime spreads and depths, and random aggressor trades at the touch."""
    half_spread = np.asarray(cfg.half_spread)[regime]
    depth = np.asarray(cfg.depth)[regime]
    y_clamped = np.clip(y, -X_CLAMP, X_CLAMP)
    bid = sigmoid(y_clamped - half_spread)
    ask = sigmoid(y_clamped + half_spread)
    traded = rng.random(t.size) < TRADE_PROBABILITY
    buy = rng.random(t.size) < 0.5
    size = rng.exponential(1.0, t.size)
    ticks = [
        TickRecord(
            ts=int(round(t[u] * 1000.0)),
            bid=float(bid[u]),
            ask=float(ask[u]),
            trade_px=float(ask[u] if buy[u] else bid[u]) if traded[u] else None,
            trade_sz=float(size[u]) if traded[u] else None,
            depth=float(depth[u]),
        )
        for u in range(t.size)
    ]
    return TickRecord.to_frame(ticks)


def simulate_scenario(cfg: ScenarioConfig, seed: int) -> Scenario:
    """Synthesise the default event-contract scenario.

    The true path is RN-consistent with a raised-volatility breakout segment, jump
    intensity boosted around announced windows and, unless switched off, a terminal drift
    toward resolution. Observations add Gaussian logit noise whose scale alternates between
    two regimes. Quotes on the observed logit and random trades form the tick CSV.

    Args:
        cfg: Scenario settings.
        seed: Scenario seed.

    Returns:
        Scenario: Truth, observations, the measurement variance per step and the ticks.
    """
    seeds = np.random.SeedSequence(seed).generate_state(3)
    params = scenario_params(cfg, seed)
    grid_t = np.arange(cfg.n_steps) * cfg.dt
    mult = intensity_schedule(grid_t, cfg.schedule, cfg.schedule_peak)
    path = _terminal_path(cfg, params, mult, seeds)

    rng = np.random.default_rng(int(seeds[2]))
    regime = noise_regime(path.t, cfg.noise_regime_length)
    sd = np.asarray(cfg.noise_sd)[regime]
    if cfg.zero_noise:
        y = path.x.copy()
    else:
        y = path.x + sd * rng.standard_normal(path.x.size)
    meas_var = np.maximum(sd**2, 1e-10)
    ticks = synth_ticks(path.t, y, regime, cfg, rng)
    logger.info(
        "Simulated %d steps: %d jumps, final p=%.4f.",
        cfg.n_steps,
        int(path.jump_marks.sum()),
        float(sigmoid(path.x[-1])),
    )
    return Scenario(
        path=path,
        y=y,
        meas_var=meas_var,
        regime=regime,
        schedule=list(cfg.schedule),
        intensity_mult=mult,
        params=params,
        ticks=ticks,
    )
