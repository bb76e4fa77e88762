"""Quote command: replay the inventory-aware quoting loop over the calibrated series."""
from typing import Dict, Optional

import click

from .base import cli, finish, handle_errors, load_calibration, open_run, run_options, step_of

from ..engine.quoting import replay
from ..models import HedgeRatio
from ..store import DEPENDENCE_JSON, FILTERED_CSV, PNL_LEDGER_CSV, QUOTE_JSON, QUOTE_TAPE_CSV, ArtifactStore

STAGE = "quote"
ESTIMATE_COLUMNS = ["sigma_b2", "lambda", "sJ2"]


def load_betas(store: ArtifactStore) -> Dict[str, HedgeRatio]:
    """Hedge ratios written by the calibrate command, if it paired this series."""
    if not store.path(DEPENDENCE_JSON).exists():
        return {}
    pairs = store.read_json(DEPENDENCE_JSON, producer="calibrate")["pairs"]
    return {name: HedgeRatio(**pair["hedge"]) for name, pair in pairs.items() if pair.get("hedge")}


@cli.command()
@run_options
@handle_errors
def quote(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str]):
    """Write the quote tape and the attributed PnL ledger."""
    config, store = open_run(config_path, seed, out_dir)
    with store.stage(STAGE):
        frame = load_calibration(store)
        filtered = store.read_csv(FILTERED_CSV, ["imbalance", "halted"], producer="filter")
        frame["imbalance"] = filtered["imbalance"].to_numpy()[: len(frame)]
        frame["halted"] = filtered["halted"].to_numpy()[: len(frame)]
        # The first row precedes any increment; it borrows the first estimate.
        frame[ESTIMATE_COLUMNS] = frame[ESTIMATE_COLUMNS].bfill().ffill()
        dt = step_of(frame["t"].to_numpy(dtype=float), config.filter.bin_seconds)
        tape, ledger, engine = replay(frame, config.quoting, config.scenario.schedule, load_betas(store), dt)
        store.write_csv(QUOTE_TAPE_CSV, tape, STAGE)
        store.write_csv(PNL_LEDGER_CSV, ledger, STAGE)
        components = ledger.drop(columns="t").sum().to_dict()
        store.write_json(
            QUOTE_JSON,
            {
                "final_inventory": engine.state.q,
                "refreshes": len(tape),
                "states": {state: int(count) for state, count in tape["state"].value_counts().sort_index().items()},
                "adverse_fills": len(engine.state.adverse_fills),
                "pnl": {name: float(value) for name, value in components.items()},
            },
            STAGE,
        )
    finish(config, store, STAGE)
    click.echo(f"Replayed {len(tape)} refreshes; final inventory {engine.state.q:+.2f}.")
