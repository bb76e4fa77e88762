"""Utility functions for the package."""
import concurrent.futures
import hashlib
import json
import time
from typing import Any, Callable, Dict, Hashable, Iterable, Optional

import numpy as np
import pandas as pd


def time_elapsed(start):
    """Returns the time elapsed since the given start time."""
    return round(time.perf_counter() - start, 2)


def ewma_alpha(half_life: float, dt: float) -> float:
    """Weight kept on the previous EWMA value after one step of length dt."""
    return float(0.5 ** (dt / half_life))


def ewma(values: np.ndarray, half_life: float, dt: float = 1.0) -> np.ndarray:
    """Causal EWMA with the given half-life; NaN inputs are skipped."""
    series = pd.Series(np.asarray(values, dtype=float))
    return series.ewm(halflife=half_life / dt, adjust=False, ignore_na=True).mean().to_numpy()


def stable_hash(payload: Any, length: int = 12) -> str:
    """Short SHA-256 digest of a JSON-serialisable payload."""
    encoded = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str).encode("utf-8")
    return hashlib.sha256(encoded).hexdigest()[:length]


def parallel_map(func: Callable, items: Iterable[Hashable], max_workers: Optional[int] = None) -> Dict[Hashable, Any]:
    """Run func on every item in a thread pool; results are keyed by item in input order."""
    items = list(items)
    results = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_item = {executor.submit(func, item): item for item in items}
        for future in concurrent.futures.as_completed(future_to_item):
            results[future_to_item[future]] = future.result()
    return {item: results[item] for item in items}
