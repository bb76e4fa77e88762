"""Filter command: canonical mid, noise model and Kalman smoother over the tick CSV."""
from typing import Optional

import click
import numpy as np
import pandas as pd

from .base import cli, finish, handle_errors, open_run, run_options

from ..config import logger
from ..engine.filtering import canonical_mid, fit_noise_model, kalman_filter_smoother, noise_variance, residual_diagnostics
from ..models import TICK_COLUMNS, InsufficientDataError
from ..store import FILTER_JSON, FILTERED_CSV, PATH_CSV, TICKS_CSV

STAGE = "filter"


def _lead_nan(values: np.ndarray) -> np.ndarray:
    """Align a per-transition series to the grid point that ends each transition."""
    return np.concatenate([[np.nan], values])


@cli.command(name="filter")
@run_options
@handle_errors
def filter_(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str]):
    """Resample the ticks, fit the noise model and smooth the observed logit."""
    config, store = open_run(config_path, seed, out_dir)
    filter_cfg = config.filter
    with store.stage(STAGE):
        ticks = store.read_csv(filter_cfg.ticks_path or TICKS_CSV, TICK_COLUMNS, producer="simulate")
        series = canonical_mid(ticks, filter_cfg.bin_seconds, filter_cfg.tick, filter_cfg.eps)
        if filter_cfg.fit_noise:
            coeffs = fit_noise_model(
                series, filter_cfg.noise_block, filter_cfg.huber_epsilon, filter_cfg.noise.clamp_lo, filter_cfg.noise.clamp_hi
            )
        else:
            coeffs = filter_cfg.noise
        output = kalman_filter_smoother(
            series,
            noise_variance(series, coeffs),
            proc_window=filter_cfg.proc_window,
            proc_floor=filter_cfg.proc_floor,
            halt_inflation=filter_cfg.halt_inflation,
        )
        frame = pd.DataFrame(
            {
                "t": series.t,
                "p_tilde": series.p_tilde,
                "y": series.y,
                "x_hat": output.x_hat,
                "var_hat": output.var_hat,
                "innov": _lead_nan(output.innovations),
                "x_filter": output.x_filter,
                "var_filter": output.var_filter,
                "meas_var": output.meas_var,
                "proc_var": _lead_nan(output.proc_var),
                "imbalance": series.imbalance,
                "halted": series.halted.astype(int),
            }
        )
        report = {"noise_model": coeffs.model_dump(), "loglik": output.loglik, "n": len(series)}
        if store.path(PATH_CSV).exists():
            truth = store.read_csv(PATH_CSV, ["x"])["x"].to_numpy()
            if truth.size == len(series):
                frame["x_true"] = truth
                report["rmse_filtered"] = float(np.sqrt(np.mean((output.x_hat - truth) ** 2)))
                report["rmse_observed"] = float(np.sqrt(np.mean((series.y - truth) ** 2)))
        try:
            report["diagnostics"] = residual_diagnostics(output).model_dump()
        except InsufficientDataError as exc:
            logger.warning("Diagnostics skipped: %s", exc)
            report["diagnostics"] = None
        store.write_csv(FILTERED_CSV, frame, STAGE)
        store.write_json(FILTER_JSON, report, STAGE)
    finish(config, store, STAGE)
    click.echo(f"Filtered {len(series)} steps into {store.root / FILTERED_CSV}.")
