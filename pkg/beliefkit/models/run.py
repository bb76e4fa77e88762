"""The run.py file defines the run config blocks and the run manifest."""
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import ConfigDict, Field, model_validator

from .base import BaseModel, ConfigModel
from .calibration import EmConfig
from .dependence import DependenceConfig
from .forecast import BenchConfig, ScheduleWindow
from .instruments import Direction, GreekBumps, PayoffKind, PayoffSpec, VarianceSpace
from .kernel import JumpLaw, KernelParams
from .market import NoiseModelCoeffs
from .quoting import QuotingConfig
from .surface import SurfaceConfig


class KernelConfig(ConfigModel):
    """The KernelConfig class defines constant kernel parameters in a config file.

    Attributes:
        sigma_b (float): Belief volatility (logit per sqrt second).
        lam (float): Jump intensity per second, written `lambda` in the file.
        jump_law (JumpLaw): Jump-size law.
        truncation_radius (float): Radius of the small-jump truncation.
        drift_cap (float): Absolute drift cap per second.
        sprime_floor (float): Floor on S' in the drift denominator.
        compensation_draws (int): Draws for Monte Carlo jump compensation.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, extra="forbid", populate_by_name=True)

    sigma_b: float = 0.05
    lam: float = Field(default=0.0005, alias="lambda")
    jump_law: JumpLaw = Field(default_factory=lambda: JumpLaw.gaussian(0.6))
    truncation_radius: float = 1.0
    drift_cap: float = 0.25
    sprime_floor: float = 1e-4
    compensation_draws: int = 600

    def to_params(
        self,
        dt: float = 1.0,
        sigma_grid: Optional[np.ndarray] = None,
        lam_grid: Optional[np.ndarray] = None,
        seed: int = 0,
    ) -> KernelParams:
        """Build kernel parameters, optionally with explicit grids."""
        return KernelParams(
            sigma_b=np.atleast_1d(self.sigma_b) if sigma_grid is None else sigma_grid,
            lam=np.atleast_1d(self.lam) if lam_grid is None else lam_grid,
            jump_law=self.jump_law,
            dt=dt,
            truncation_radius=self.truncation_radius,
            drift_cap=self.drift_cap,
            sprime_floor=self.sprime_floor,
            compensation_draws=self.compensation_draws,
            compensation_seed=seed,
        )


class ScenarioConfig(ConfigModel):
    """The ScenarioConfig class defines the synthetic event-contract scenario.

    Attributes:
        n_steps (int): Steps of the path.
        dt (float): Step in seconds.
        p0 (float): Initial probability.
        kernel (KernelConfig): Baseline kernel parameters.
        breakout (Tuple[float, float]): Early segment [start, end) in seconds with raised volatility.
        breakout_sigma (float): Belief volatility inside the breakout segment.
        schedule (List[ScheduleWindow]): Announced jump windows.
        schedule_peak (float): Peak extra intensity multiple at a window centre.
        terminal_drift (bool): Drift toward a boundary before resolution.
        terminal_window (float): Seconds before the end over which the terminal drift acts.
        terminal_target (float): |x| the terminal drift aims for.
        noise_sd (Tuple[float, float]): Observation noise sd of the two regimes (logit).
        noise_regime_length (float): Seconds per noise regime.
        half_spread (Tuple[float, float]): Quoted half-spread per regime (logit).
        depth (Tuple[float, float]): Displayed depth per regime.
        zero_noise (bool): Observe the true path exactly.
    """

    n_steps: int = 6000
    dt: float = 1.0
    p0: float = 0.35
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    breakout: Tuple[float, float] = (600.0, 1200.0)
    breakout_sigma: float = 0.12
    schedule: List[ScheduleWindow] = Field(
        default_factory=lambda: [ScheduleWindow(center=c) for c in (1800.0, 3300.0, 4800.0)]
    )
    schedule_peak: float = 8.9
    terminal_drift: bool = True
    terminal_window: float = 300.0
    terminal_target: float = 10.0
    noise_sd: Tuple[float, float] = (0.03, 0.09)
    noise_regime_length: float = 1000.0
    half_spread: Tuple[float, float] = (0.02, 0.05)
    depth: Tuple[float, float] = (100.0, 20.0)
    zero_noise: bool = False

    @model_validator(mode="after")
    def _check_values(self) -> "ScenarioConfig":
        if not 0.0 < self.p0 < 1.0:
            raise ValueError(f"p0 must lie in (0, 1), got {self.p0}")
        if self.n_steps < 2 or self.dt <= 0:
            raise ValueError("n_steps must be at least 2 and dt positive")
        if min(self.noise_sd) < 0 or min(self.half_spread) < 0 or min(self.depth) <= 0:
            raise ValueError("noise, spreads and depths must be nonnegative")
        return self


class FilterConfig(ConfigModel):
    """The FilterConfig class defines the canonical-mid and Kalman filter settings.

    Attributes:
        bin_seconds (float): Resampling bin width.
        tick (float): Price tick used by the weights and the debounce.
        eps (float): Probability clamp.
        proc_window (int): Steps of the rolling process-noise proxy.
        proc_floor (float): Floor of the proxy as a share of the rolling mean of dy^2.
        halt_inflation (float): Variance inflation when a halt lifts.
        fit_noise (bool): Fit the noise model by Huber regression.
        noise (NoiseModelCoeffs): Noise model used when not fitted, and its clamps.
        noise_block (int): Block length of the noise-model fit target.
        huber_epsilon (float): Huber threshold of the noise-model fit.
        ticks_path (str): Tick CSV to read instead of the run directory's ticks.csv.
    """

    bin_seconds: float = 1.0
    tick: float = 0.001
    eps: float = 1e-5
    proc_window: int = 120
    proc_floor: float = 0.05
    halt_inflation: float = 10.0
    fit_noise: bool = True
    noise: NoiseModelCoeffs = Field(default_factory=NoiseModelCoeffs)
    noise_block: int = 20
    huber_epsilon: float = 1.35
    ticks_path: Optional[str] = None


def _default_instruments() -> List[PayoffSpec]:
    return [
        PayoffSpec(name="vanilla", kind=PayoffKind.VANILLA),
        PayoffSpec(name="digital", kind=PayoffKind.DIGITAL, strike_x=0.5),
        PayoffSpec(name="x_variance", kind=PayoffKind.VARIANCE, space=VarianceSpace.LOGIT),
        PayoffSpec(name="p_variance", kind=PayoffKind.VARIANCE, space=VarianceSpace.PROBABILITY),
        PayoffSpec(name="corridor", kind=PayoffKind.CORRIDOR, space=VarianceSpace.PROBABILITY, corridor=(0.2, 0.8)),
        PayoffSpec(name="first_passage", kind=PayoffKind.FIRST_PASSAGE, level=0.7, direction=Direction.HIT_ABOVE),
    ]


class PricerConfig(ConfigModel):
    """The PricerConfig class defines the instruments and numerics of the price command.

    Attributes:
        p0 (float): Current probability; None uses the last filtered value of the run.
        t0 (float): Valuation time in seconds.
        T (float): Expiry in seconds.
        kernel (KernelConfig): Kernel parameters used when not calibrated.
        from_calibration (bool): Use the last calibrated window of the run directory.
        instruments (List[PayoffSpec]): Instruments to price.
        n_paths (int): Monte Carlo paths.
        antithetic (bool): Antithetic Brownian pairing.
        bridge (bool): Brownian-bridge crossing correction for first passage.
        n_x (int): PIDE space nodes.
        n_t (int): PIDE time steps.
        greeks (bool): Compute Greeks for each instrument.
        bumps (GreekBumps): Greek bump sizes.
    """

    p0: Optional[float] = 0.4
    t0: float = 0.0
    T: float = 600.0
    kernel: KernelConfig = Field(
        default_factory=lambda: KernelConfig(sigma_b=0.05, lam=0.001, jump_law=JumpLaw.gaussian(0.5))
    )
    from_calibration: bool = False
    instruments: List[PayoffSpec] = Field(default_factory=_default_instruments)
    n_paths: int = 20000
    antithetic: bool = True
    bridge: bool = True
    n_x: int = 256
    n_t: int = 128
    greeks: bool = True
    bumps: GreekBumps = Field(default_factory=GreekBumps)

    @model_validator(mode="after")
    def _check_values(self) -> "PricerConfig":
        if self.T <= self.t0:
            raise ValueError("T must exceed t0")
        if self.p0 is not None and not 0.0 < self.p0 < 1.0:
            raise ValueError("p0 must lie in (0, 1)")
        if self.n_paths < 1000:
            raise ValueError("n_paths must be at least 1000")
        return self


class ChartsConfig(ConfigModel):
    """The ChartsConfig class switches chart emission."""

    enabled: bool = True


class RunConfig(ConfigModel):
    """The RunConfig class defines every parameter block of a run.

    Attributes:
        seed (int): Global seed, echoed in every output.
        scenario (ScenarioConfig): Synthetic scenario of the simulate and bench commands.
        filter (FilterConfig): Canonical mid and filter settings.
        em (EmConfig): EM calibration settings.
        surface (SurfaceConfig): Surface binning and smoothing settings.
        dependence (DependenceConfig): Pair dependence settings.
        pricer (PricerConfig): Instruments to price.
        quoting (QuotingConfig): Quoting engine settings.
        bench (BenchConfig): Forecast benchmark settings.
        charts (ChartsConfig): Chart emission.
    """

    seed: int = 7
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)
    em: EmConfig = Field(default_factory=EmConfig)
    surface: SurfaceConfig = Field(default_factory=SurfaceConfig)
    dependence: DependenceConfig = Field(default_factory=DependenceConfig)
    pricer: PricerConfig = Field(default_factory=PricerConfig)
    quoting: QuotingConfig = Field(default_factory=QuotingConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    charts: ChartsConfig = Field(default_factory=ChartsConfig)


class RunManifest(BaseModel):
    """The RunManifest class defines the provenance record of a run directory.

    Attributes:
        manifest_id (str): Hash of the resolved config and code version.
        config_hash (str): Hash of the resolved config alone.
        version (str): Package version.
        seeds (List[int]): Seeds used.
        created_at (str): ISO timestamp of the first stage.
        updated_at (str): ISO timestamp of the last stage.
        stages (Dict[str, float]): Duration in seconds per stage.
        outputs (Dict[str, List[str]]): Files written per stage.
    """

    manifest_id: str
    config_hash: str
    version: str
    seeds: List[int]
    created_at: str
    updated_at: str
    stages: Dict[str, float] = Field(default_factory=dict)
    outputs: Dict[str, List[str]] = Field(default_factory=dict)
