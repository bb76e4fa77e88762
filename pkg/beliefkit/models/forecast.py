"""The forecast.py file defines the data models of the variance forecasting benchmark."""
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import Field, model_validator

from .base import BaseModel, ConfigModel, FloatArray


class Regime(Enum):
    """An enumeration of evaluation regimes."""

    QUIET = "quiet"
    JUMP_WINDOW = "jump-window"

    @staticmethod
    def schema() -> Dict[str, Any]:
        """Get the schema for the regime enum.

        Returns:
            Dict[str, Any]: The schema for the regime enum.
        """
        return {"type": "string", "enum": [regime.value for regime in Regime]}


class ScheduleWindow(BaseModel):
    """The ScheduleWindow class defines an announced news window.

    Attributes:
        center (float): Window centre in seconds.
        width (float): Gaussian kernel width in seconds.
    """

    center: float
    width: float = 90.0

    @model_validator(mode="after")
    def _check_width(self) -> "ScheduleWindow":
        if self.width <= 0:
            raise ValueError("schedule width must be positive")
        return self


class ForecastTask(BaseModel):
    """The ForecastTask class defines the causal h-step variance forecasting task.

    Attributes:
        h (int): Horizon in steps.
        dt (float): Step in seconds.
        n (int): Length of the filtered path.
        schedule (List[ScheduleWindow]): Announced windows.
    """

    h: int = 60
    dt: float = 1.0
    n: int
    schedule: List[ScheduleWindow] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_task(self) -> "ForecastTask":
        if self.h < 1:
            raise ValueError("h must be at least 1")
        if self.n <= self.h:
            raise ValueError(f"the series must be longer than h={self.h}, got {self.n}")
        return self

    @property
    def n_decisions(self) -> int:
        """Decision times; the last h grid points have no full window."""
        return self.n - self.h

    def splits(self) -> Tuple[slice, slice, slice]:
        """Contiguous train/validation/test thirds of the decision times."""
        third = self.n_decisions // 3
        return slice(0, third), slice(third, 2 * third), slice(2 * third, self.n_decisions)


class ForecastRecords(BaseModel):
    """The ForecastRecords class defines one model's forecasts at every decision time.

    Attributes:
        model (str): Model id.
        t (FloatArray): Decision times.
        v_hat (FloatArray): Forecast variance (logit^2), NaN where skipped.
        rv (FloatArray): Realised variance (logit^2).
        regime (List[Regime]): Regime label per decision time.
        skipped (int): Decision times without a forecast.
    """

    model: str
    t: FloatArray
    v_hat: FloatArray
    rv: FloatArray
    regime: List[Regime]
    skipped: int = 0

    @model_validator(mode="after")
    def _check_alignment(self) -> "ForecastRecords":
        if not self.t.size == self.v_hat.size == self.rv.size == len(self.regime):
            raise ValueError("forecast records must be aligned")
        if np.any(self.rv < 0):
            raise ValueError("realised variance must be nonnegative")
        return self

    def subset(self, rows: slice) -> "ForecastRecords":
        """Records of a contiguous slice of decision times."""
        return ForecastRecords(
            model=self.model,
            t=self.t[rows],
            v_hat=self.v_hat[rows],
            rv=self.rv[rows],
            regime=self.regime[rows],
            skipped=int(np.sum(~np.isfinite(self.v_hat[rows]))),
        )

    def to_frame(self) -> pd.DataFrame:
        """Convert the records to their CSV layout."""
        return pd.DataFrame(
            {"t": self.t, "v_hat": self.v_hat, "rv": self.rv, "regime": [regime.value for regime in self.regime]}
        )


class RegimeMetrics(BaseModel):
    """The RegimeMetrics class defines the losses of one record subset."""

    n: int
    mse: float
    mae: float
    log_mse: float
    qlike: float


class MetricReport(BaseModel):
    """The MetricReport class defines a model's test-slice losses.

    Attributes:
        model (str): Model id.
        n (int): Evaluated decision times.
        mse (float): Mean squared error.
        mae (float): Mean absolute error.
        log_mse (float): Mean squared error of log variances.
        qlike (float): Mean QLIKE loss.
        by_regime (Dict[str, RegimeMetrics]): Losses per regime.
    """

    model: str
    n: int
    mse: float
    mae: float
    log_mse: float
    qlike: float
    by_regime: Dict[str, RegimeMetrics] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_metrics(self) -> "MetricReport":
        values = [self.mse, self.mae, self.log_mse, self.qlike]
        if not all(np.isfinite(values)) or self.qlike < 0:
            raise ValueError(f"{self.model}: metrics must be finite with qlike >= 0, got {values}")
        return self


class BenchConfig(ConfigModel):
    """The BenchConfig class defines the forecasting benchmark settings.

    Attributes:
        h (int): Horizon in steps.
        cj_grid (List[float]): Candidate jump weights.
        cj_tie_tolerance (float): Relative QLIKE gap treated as a tie.
        jumps_per_window (float): Expected jumps per announced window.
        cap_quantile (float): Quantile of the smoothed intensity capping the boost.
        hold_half_life (float): EWMA half-life of the held calibration streams in seconds.
        regime_half_width (float): Seconds around a window centre labelled jump-window.
        garch_scale (float): Scale applied to probability increments before the GARCH fit.
        seeds (List[int]): Scenario seeds; empty uses the run seed.
        input_dir (str): Existing run directory to benchmark instead of a fresh simulation.
    """

    h: int = 60
    cj_grid: List[float] = Field(default_factory=lambda: [round(0.3 + 0.1 * i, 1) for i in range(8)])
    cj_tie_tolerance: float = 1e-9
    jumps_per_window: float = 1.0
    cap_quantile: float = 0.95
    hold_half_life: float = 60.0
    regime_half_width: float = 90.0
    garch_scale: float = 100.0
    seeds: List[int] = Field(default_factory=list)
    input_dir: Optional[str] = None

    @model_validator(mode="after")
    def _check_values(self) -> "BenchConfig":
        if self.h < 1 or not self.cj_grid:
            raise ValueError("h must be at least 1 and cj_grid non-empty")
        if not 0.0 < self.cap_quantile <= 1.0:
            raise ValueError("cap_quantile must lie in (0, 1]")
        return self


class BenchResult(BaseModel):
    """The BenchResult class defines the metric table of one benchmark run.

    Attributes:
        seed (int): Scenario seed.
        c_J (float): Tuned jump weight.
        reports (List[MetricReport]): Test-slice metrics per model.
        skipped (Dict[str, int]): Skipped decision times per model.
        n_test (int): Decision times in the test slice.
        full_sample (List[MetricReport]): Metrics per model over every decision time, i.e.
            every timestamp but the last h.
        n_full (int): Decision times in the full sample.
    """

    seed: int
    c_J: float
    reports: List[MetricReport]
    skipped: Dict[str, int] = Field(default_factory=dict)
    n_test: int
    full_sample: List[MetricReport] = Field(default_factory=list)
    n_full: int = 0

    def report(self, model: str, full: bool = False) -> MetricReport:
        """Metrics of one model on the test slice, or on the full sample."""
        for report in self.full_sample if full else self.reports:
            if report.model == model:
                return report
        raise KeyError(model)

    def to_table(self, full: bool = False) -> str:
        """Aligned-column text rendering of the test or full-sample metric table."""
        header = f"{'model':<16}{'MSE':>16}{'MAE':>14}{'logMSE':>14}{'QLIKE':>14}"
        lines = [header, "-" * len(header)]
        for report in self.full_sample if full else self.reports:
            lines.append(
                f"{report.model:<16}{report.mse:>16.6g}{report.mae:>14.6g}{report.log_mse:>14.6g}{report.qlike:>14.6g}"
            )
        return "\n".join(lines)
