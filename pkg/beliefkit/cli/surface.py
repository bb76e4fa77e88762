"""Surface command: bin and smooth the calibrated streams over (tau, m)."""
from typing import Optional

import click
import numpy as np

from .base import cli, finish, handle_errors, load_calibration, open_run, run_options, step_of

from ..engine.surface import build_surface, news_windows_in_tau, surface_frame
from ..models import CalibrationSlice
from ..store import FILTERED_CSV, SURFACE_CSV, SURFACE_JSON

STAGE = "surface"


@cli.command()
@run_options
@handle_errors
def surface(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str]):
    """Fit the sigma_b, lambda and sJ2 surfaces with their bootstrap bands."""
    config, store = open_run(config_path, seed, out_dir)
    with store.stage(STAGE):
        calibration = load_calibration(store)
        filtered = store.read_csv(FILTERED_CSV, ["t", "var_hat"], producer="filter")
        t = calibration["t"].to_numpy(dtype=float)
        dt = step_of(t, config.filter.bin_seconds)
        resolution_time = config.surface.resolution_time or float(t[-1] + dt)
        # Row u carries the estimates of the increment ending at u.
        piece = CalibrationSlice(
            t=t[1:],
            m=calibration["x_hat"].to_numpy(dtype=float)[1:],
            precision=1.0 / np.maximum(filtered["var_hat"].to_numpy(dtype=float)[1:], 1e-12),
            sigma_b2=calibration["sigma_b2"].to_numpy(dtype=float)[1:],
            lam=calibration["lambda"].to_numpy(dtype=float)[1:],
            sJ2=calibration["sJ2"].to_numpy(dtype=float)[1:],
            resolution_time=resolution_time,
        )
        windows = [
            interval
            for window in config.scenario.schedule
            for interval in news_windows_in_tau([window.center], window.width, resolution_time)
        ]
        fitted = build_surface([piece], config.surface, windows)
        store.write_json(SURFACE_JSON, {"resolution_time": resolution_time, "surface": fitted.model_dump()}, STAGE)
        store.write_csv(SURFACE_CSV, surface_frame(fitted), STAGE)
    finish(config, store, STAGE)
    summary = ", ".join(f"{name} alpha={layer.alpha:.3g}" for name, layer in fitted.layers.items())
    click.echo(f"Fitted surfaces: {summary}.")
