"""Calibrate command: EM jump/diffusion separation with RN drift re-filtering."""
from pathlib import Path
from typing import Dict, Optional

import click
import numpy as np
import pandas as pd

from .base import cli, finish, handle_errors, load_calibration, load_filter_output, open_run, run_options

from ..config import logger
from ..engine.dependence import estimate_pairs
from ..engine.em import calibrate as run_calibration
from ..engine.filtering import residual_diagnostics
from ..models import InsufficientDataError
from ..store import CALIBRATION_CSV, CALIBRATION_JSON, DEPENDENCE_JSON

STAGE = "calibrate"


def pair_series(frame: pd.DataFrame) -> Dict[str, np.ndarray]:
    """Dependence inputs of one calibrated series; per-increment streams drop the first row."""
    return {
        "x_hat": frame["x_hat"].to_numpy(dtype=float),
        "gamma": frame["gamma"].to_numpy(dtype=float)[1:],
        "sigma_b2": frame["sigma_b2"].to_numpy(dtype=float)[1:],
    }


@cli.command()
@run_options
@handle_errors
def calibrate(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str]):
    """Separate diffusion from jumps and enforce the risk-neutral drift."""
    config, store = open_run(config_path, seed, out_dir)
    with store.stage(STAGE):
        first, _ = load_filter_output(config, store)
        em_cfg = config.em.model_copy(update={"dt": first.dt})
        params = config.scenario.kernel.to_params(dt=first.dt, seed=config.seed)
        result = run_calibration(first, em_cfg, params)
        frame = result.to_frame()
        frame["x_hat"] = result.filter_out.path(not em_cfg.causal)
        store.write_csv(CALIBRATION_CSV, frame, STAGE)

        report = {
            "sanity": result.sanity.model_dump(),
            "history": result.history,
            "loglik_trace": result.loglik_trace,
            "degenerate_count": result.responsibilities.degenerate_count,
        }
        try:
            report["diagnostics"] = residual_diagnostics(result.filter_out, result.responsibilities.jump_flags).model_dump()
        except InsufficientDataError as exc:
            logger.warning("Diagnostics skipped: %s", exc)
            report["diagnostics"] = None
        store.write_json(CALIBRATION_JSON, report, STAGE)

        if config.dependence.pairs:
            others = {
                Path(path).name: pair_series(load_calibration(store, str(Path(path) / CALIBRATION_CSV)))
                for path in config.dependence.pairs
            }
            pairs = estimate_pairs(pair_series(frame), others, config.dependence, first.dt)
            for pair in pairs:
                store.write_csv(f"dependence_{pair.name}.csv", pair.dependence.to_frame(), STAGE)
            store.write_json(
                DEPENDENCE_JSON,
                {
                    "pairs": {
                        pair.name: {
                            "summary": pair.dependence.summary(),
                            "hedge": None if pair.hedge is None else pair.hedge.model_dump(),
                        }
                        for pair in pairs
                    }
                },
                STAGE,
            )
    finish(config, store, STAGE)
    click.echo(
        f"Calibrated {len(frame) - 1} increments: {result.sanity.n_flagged_jumps} jumps flagged, "
        f"p-variance ratio {result.sanity.ratio:.3f}."
    )
