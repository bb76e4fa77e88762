"""Simulate command: the synthetic event-contract scenario."""
from typing import Optional

import click
import pandas as pd

from .base import cli, finish, handle_errors, open_run, run_options

from ..engine.kernel import sigmoid
from ..engine.scenario import simulate_scenario
from ..store import OBSERVATIONS_CSV, PATH_CSV, SCHEDULE_JSON, TICKS_CSV

STAGE = "simulate"


@cli.command()
@run_options
@handle_errors
def simulate(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str]):
    """Write the true path, the noisy observations, the ticks and the news schedule."""
    config, store = open_run(config_path, seed, out_dir)
    with store.stage(STAGE):
        scenario = simulate_scenario(config.scenario, config.seed)
        store.write_csv(PATH_CSV, scenario.path.to_frame(), STAGE)
        observations = pd.DataFrame(
            {
                "t": scenario.path.t,
                "y": scenario.y,
                "meas_var": scenario.meas_var,
                "regime": scenario.regime,
                "intensity_mult": scenario.intensity_mult,
            }
        )
        store.write_csv(OBSERVATIONS_CSV, observations, STAGE)
        store.write_csv(TICKS_CSV, scenario.ticks, STAGE)
        store.write_json(
            SCHEDULE_JSON,
            {
                "seed": config.seed,
                "schedule": [window.model_dump() for window in scenario.schedule],
                "resolution_time": float(scenario.path.t[-1]),
                "n_jumps": int(scenario.path.jump_marks.sum()),
                "p_final": float(sigmoid(scenario.path.x[-1])),
            },
            STAGE,
        )
    finish(config, store, STAGE)
    click.echo(f"Simulated {len(scenario.path.t)} steps into {store.root}.")
