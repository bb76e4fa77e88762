"""The cli.base module defines the command group, the shared run flags and the error
handler that maps domain errors to exit codes.
"""
import functools
from pathlib import Path
from typing import Callable, Optional, Tuple

import click
import numpy as np
import pandas as pd

from .. import __version__
from ..charts import emit_charts
from ..config import load_run_config, logger, settings
from ..engine.filtering import kalman_filter_smoother
from ..models import ConfigurationError, DataQualityError, FilterOutput, RunConfig
from ..store import CALIBRATION_CSV, FILTERED_CSV, ArtifactStore

EXIT_UNEXPECTED = 1
FILTER_COLUMNS = ["t", "y", "x_hat", "var_hat", "meas_var", "proc_var", "halted"]
CALIBRATION_COLUMNS = ["t", "sigma_b2", "lambda", "sJ2", "gamma", "mu"]


@click.group()
@click.version_option(__version__, prog_name="beliefkit")
def cli():
    """Risk-neutral logit jump-diffusion tooling for event contracts."""


def run_options(func: Callable) -> Callable:
    """Attach the --config, --seed and --out flags every stage takes."""
    func = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Run directory.")(func)
    func = click.option("--seed", type=int, default=None, help="Override the config seed.")(func)
    func = click.option(
        "--config", "config_path", type=click.Path(dir_okay=False), default=None, help="YAML run config."
    )(func)
    return func


def handle_errors(func: Callable) -> Callable:
    """Log a failed command and exit with 2 (config), 3 (data) or 1 (anything else)."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ConfigurationError, DataQualityError) as exc:
            logger.error("%s: %s", type(exc).__name__, exc)
            raise SystemExit(exc.exit_code) from exc
        except click.exceptions.ClickException:
            raise
        except Exception as exc:  # pylint: disable=broad-except
            logger.exception(exc)
            raise SystemExit(EXIT_UNEXPECTED) from exc

    return wrapper


def open_run(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str]) -> Tuple[RunConfig, ArtifactStore]:
    """Resolve the run config and open its run directory."""
    config = load_run_config(config_path, seed)
    root = Path(out_dir or settings.BELIEFKIT_OUTPUT_DIR)
    return config, ArtifactStore(root, config)


def finish(config: RunConfig, store: ArtifactStore, stage: str) -> None:
    """Emit the charts of the run directory when enabled."""
    if not config.charts.enabled:
        return
    for chart in emit_charts(store.root, config.em.tau_J):
        store.note_output(chart.name, stage)
    store.write_manifest()


def step_of(t: np.ndarray, default: float) -> float:
    """Grid step of a uniform time column."""
    return float(t[1] - t[0]) if t.size > 1 else float(default)


def load_filter_output(config: RunConfig, store: ArtifactStore) -> Tuple[FilterOutput, pd.DataFrame]:
    """Rebuild the filter pass from the filter CSV so calibration can re-run the smoother."""
    frame = store.read_csv(FILTERED_CSV, FILTER_COLUMNS, producer="filter")
    output = kalman_filter_smoother(
        frame["y"].to_numpy(dtype=float),
        frame["meas_var"].to_numpy(dtype=float),
        proc_var=frame["proc_var"].to_numpy(dtype=float)[1:],
        dt=step_of(frame["t"].to_numpy(dtype=float), config.filter.bin_seconds),
        halted=frame["halted"].to_numpy(dtype=bool),
        halt_inflation=config.filter.halt_inflation,
    )
    return output, frame


def load_calibration(store: ArtifactStore, source: str = CALIBRATION_CSV) -> pd.DataFrame:
    """Read a calibration CSV of this or another run directory."""
    return store.read_csv(source, [*CALIBRATION_COLUMNS, "x_hat"], producer="calibrate")
