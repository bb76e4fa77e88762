"""The charts.py file renders static SVG charts of the stage outputs.

Charts are best effort: a missing or unreadable series is logged and skipped.
"""
import json
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .config import logger  # noqa: E402
from .store import (  # noqa: E402
    BENCH_JSON,
    CALIBRATION_CSV,
    FILTERED_CSV,
    QUOTE_TAPE_CSV,
    SURFACE_CSV,
)

# Stable SVG ids and no timestamp, so reruns write identical files.
plt.rcParams["svg.hashsalt"] = "beliefkit"
SVG_METADATA = {"Date": None}

FILTER_SVG = "filter.svg"
SIGMA_SVG = "sigma_b.svg"
SURFACE_SVG = "surface_sigma_b.svg"
QUOTES_SVG = "quote_tape.svg"
BENCH_SVG = "bench_qlike.svg"


def _read_csv(path: Path) -> pd.DataFrame:
    with path.open("r", encoding="utf-8") as handle:
        first = handle.readline()
    return pd.read_csv(path, skiprows=1 if first.startswith("#") else 0)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    return path


def chart_filter(frame: pd.DataFrame, path: Path) -> Path:
    """Observed and filtered logit with a two-standard-deviation band."""
    fig, ax = plt.subplots(figsize=(10, 4))
    t = frame["t"].to_numpy()
    sd = np.sqrt(np.maximum(frame["var_hat"].to_numpy(), 0.0))
    ax.plot(t, frame["y"], linewidth=0.5, color="gray", alpha=0.6, label="observed y")
    ax.plot(t, frame["x_hat"], linewidth=1.0, color="blue", label="filtered x")
    ax.fill_between(t, frame["x_hat"] - 2 * sd, frame["x_hat"] + 2 * sd, color="blue", alpha=0.15, label="2 sd band")
    if "x_true" in frame:
        ax.plot(t, frame["x_true"], linewidth=0.8, color="black", linestyle="--", label="true x")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("logit")
    ax.legend(loc="upper left")
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def chart_sigma(frame: pd.DataFrame, path: Path, tau_J: float = 0.7) -> Path:
    """Belief volatility over time with flagged jumps."""
    fig, ax = plt.subplots(figsize=(10, 4))
    t = frame["t"].to_numpy()
    sigma = np.sqrt(np.maximum(frame["sigma_b2"].to_numpy(), 0.0))
    ax.plot(t, sigma, linewidth=1.0, color="blue", label="sigma_b")
    flags = frame["gamma"].to_numpy() > tau_J
    if np.any(flags):
        ax.scatter(t[flags], sigma[flags], color="red", s=20, zorder=5, label=f"jumps (n={int(flags.sum())})")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("sigma_b (logit / sqrt s)")
    ax.legend(loc="upper right")
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def chart_surface(frame: pd.DataFrame, path: Path, layer: str = "sigma_b") -> Path:
    """Heatmap of one surface layer over (tau, m)."""
    grid = frame.pivot_table(index="m", columns="tau", values=layer)
    fig, ax = plt.subplots(figsize=(8, 5))
    mesh = ax.pcolormesh(grid.columns.to_numpy(), grid.index.to_numpy(), grid.to_numpy(), shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=layer)
    ax.set_xlabel("tau (s)")
    ax.set_ylabel("m (logit)")
    return _save(fig, path)


def chart_quotes(tape: pd.DataFrame, path: Path) -> Path:
    """Displayed bid and ask probabilities, with pulled periods left empty."""
    fig, ax = plt.subplots(figsize=(10, 4))
    live = tape["state"] != "pulled"
    bid = tape["p_bid"].where(live)
    ask = tape["p_ask"].where(live)
    ax.fill_between(tape["t"], bid, ask, color="green", alpha=0.3, label="quoted spread")
    ax.plot(tape["t"], bid, linewidth=0.6, color="green")
    ax.plot(tape["t"], ask, linewidth=0.6, color="green")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("p")
    ax.legend(loc="upper left")
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def bench_qlike(document: Dict[str, Any]) -> Dict[str, float]:
    """Per-model QLIKE of a bench report, averaged over seeds."""
    return {model: float(metrics["qlike"]) for model, metrics in document["summary"].items()}


def chart_bench(document: Dict[str, Any], path: Path) -> Path:
    """Bar chart of per-model QLIKE."""
    values = bench_qlike(document)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(list(values), list(values.values()), color="steelblue")
    ax.set_ylabel("QLIKE")
    if min(values.values(), default=0.0) > 0:
        ax.set_yscale("log")
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, path)


def emit_charts(root: Union[str, Path], tau_J: float = 0.7) -> List[Path]:
    """Write a chart for every stage output present in a run directory.

    Returns:
        List[Path]: The charts written.
    """
    root = Path(root)
    jobs: Dict[str, Callable[[], Optional[Path]]] = {
        FILTERED_CSV: lambda: chart_filter(_read_csv(root / FILTERED_CSV), root / FILTER_SVG),
        CALIBRATION_CSV: lambda: chart_sigma(_read_csv(root / CALIBRATION_CSV), root / SIGMA_SVG, tau_J),
        SURFACE_CSV: lambda: chart_surface(_read_csv(root / SURFACE_CSV), root / SURFACE_SVG),
        QUOTE_TAPE_CSV: lambda: chart_quotes(_read_csv(root / QUOTE_TAPE_CSV), root / QUOTES_SVG),
        BENCH_JSON: lambda: chart_bench(json.loads((root / BENCH_JSON).read_text(encoding="utf-8")), root / BENCH_SVG),
    }
    written = []
    for source, job in jobs.items():
        if not (root / source).exists():
            logger.debug("No %s; chart skipped.", source)
            continue
        try:
            written.append(job())
        except Exception as exc:  # pylint: disable=broad-except
            logger.warning("Chart for %s skipped: %s", source, exc)
    return written
