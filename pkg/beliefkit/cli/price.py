"""Price command: belief-variance swaps, digitals, corridors and first-passage notes."""
from typing import Optional

import click
import numpy as np

from .base import cli, finish, handle_errors, load_calibration, open_run, run_options

from ..config import logger
from ..engine.kernel import logit, sigmoid
from ..engine.pricing import price_instruments
from ..models import InsufficientDataError, JumpLaw, KernelConfig, RunConfig
from ..store import FILTERED_CSV, PRICES_JSON, ArtifactStore

STAGE = "price"


def calibrated_kernel(config: RunConfig, store: ArtifactStore) -> KernelConfig:
    """Constant kernel from the last calibrated step; jumps are taken gaussian with the fitted second moment."""
    frame = load_calibration(store).dropna(subset=["sigma_b2", "lambda", "sJ2"])
    if frame.empty:
        raise InsufficientDataError("Calibrated kernel", 0, 1)
    last = frame.iloc[-1]
    base = config.pricer.kernel
    return base.model_copy(
        update={
            "sigma_b": float(np.sqrt(max(last["sigma_b2"], 0.0))),
            "lam": float(max(last["lambda"], 0.0)),
            "jump_law": JumpLaw.gaussian(float(np.sqrt(max(last["sJ2"], 1e-12)))),
        }
    )


def current_logit(config: RunConfig, store: ArtifactStore) -> float:
    """Logit of the configured p0, or the last filtered value of the run."""
    if config.pricer.p0 is not None:
        return float(logit(config.pricer.p0))
    frame = store.read_csv(FILTERED_CSV, ["x_hat"], producer="filter")
    return float(frame["x_hat"].iloc[-1])


@cli.command()
@run_options
@handle_errors
def price(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str]):
    """Price the configured instruments by closed form, PIDE and Monte Carlo."""
    config, store = open_run(config_path, seed, out_dir)
    with store.stage(STAGE):
        kernel = calibrated_kernel(config, store) if config.pricer.from_calibration else config.pricer.kernel
        params = kernel.to_params(dt=config.scenario.dt, seed=config.seed)
        x0 = current_logit(config, store)
        logger.info("Pricing at x0=%.4f (p0=%.4f) over [%g, %g] s.", x0, float(sigmoid(x0)), config.pricer.t0, config.pricer.T)
        records = price_instruments(config.pricer, params, x0, config.seed)
        store.write_json(
            PRICES_JSON,
            {
                "seed": config.seed,
                "x0": x0,
                "p0": float(sigmoid(x0)),
                "kernel": kernel.model_dump(by_alias=True),
                "instruments": records,
            },
            STAGE,
        )
    finish(config, store, STAGE)
    for record in records:
        values = ", ".join(f"{result['method']}={result['value']:.6g}" for result in record["results"])
        click.echo(f"{record['instrument']['name']}: {values}")
