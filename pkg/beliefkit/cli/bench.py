"""Bench command: the five-model forward-variance comparison."""
from pathlib import Path
from typing import Dict, List, Optional

import click
import numpy as np

from .base import cli, finish, handle_errors, open_run, run_options

from ..engine.forecast import MODEL_IDS, run_bench
from ..engine.scenario import Scenario
from ..models import BenchResult, RunConfig
from ..store import BENCH_JSON, BENCH_TXT, OBSERVATIONS_CSV, ArtifactStore

STAGE = "bench"
METRICS = ("mse", "mae", "log_mse", "qlike")


def load_scenario(config: RunConfig, store: ArtifactStore) -> Scenario:
    """Observations of an existing run directory in the simulate layout."""
    frame = store.read_csv(str(Path(config.bench.input_dir) / OBSERVATIONS_CSV), ["t", "y", "meas_var"], producer="simulate")
    return Scenario(
        path=None,
        y=frame["y"].to_numpy(dtype=float),
        meas_var=frame["meas_var"].to_numpy(dtype=float),
        regime=frame["regime"].to_numpy(dtype=int) if "regime" in frame else np.zeros(len(frame), dtype=int),
        schedule=list(config.scenario.schedule),
        intensity_mult=None,
        params=None,
        ticks=None,
    )


def summarise(results: List[BenchResult], full: bool = False) -> Dict[str, Dict[str, float]]:
    """Per-model metrics averaged over seeds, on the test slice or the full sample."""
    return {
        model: {
            metric: float(np.mean([getattr(result.report(model, full), metric) for result in results])) for metric in METRICS
        }
        for model in MODEL_IDS
    }


@cli.command()
@run_options
@handle_errors
def bench(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str]):
    """Simulate, calibrate causally and score every forecaster on the test third and the full sample."""
    config, store = open_run(config_path, seed, out_dir)
    with store.stage(STAGE):
        scenario = load_scenario(config, store) if config.bench.input_dir else None
        seeds = [config.seed] if scenario is not None or not config.bench.seeds else list(config.bench.seeds)
        results = []
        for run_seed in seeds:
            result, records = run_bench(config, run_seed, scenario)
            results.append(result)
            for model, record in records.items():
                store.write_csv(f"forecast_{model}_seed{run_seed}.csv", record.to_frame(), STAGE)
        store.write_json(
            BENCH_JSON,
            {
                "seeds": seeds,
                "results": [result.model_dump() for result in results],
                "summary": summarise(results),
                "full_sample": summarise(results, full=True),
            },
            STAGE,
        )
        blocks = [
            f"seed {result.seed} (c_J={result.c_J:.1f}, n_test={result.n_test})\n{result.to_table()}\n\n"
            f"seed {result.seed} full sample (n={result.n_full}, last h timestamps excluded)\n{result.to_table(full=True)}"
            for result in results
        ]
        store.write_text(BENCH_TXT, "\n\n".join(blocks), STAGE)
    finish(config, store, STAGE)
    click.echo("\n\n".join(blocks))
