"""The store.py file defines a simple file client that reads and writes the CSV and JSON
artifacts of a run directory and keeps its manifest.
"""

import json
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, Optional, Union

import pandas as pd

from . import __version__
from .config import logger
from .models import MissingArtifactError, RunConfig, RunManifest, SchemaMismatchError
from .utils import stable_hash, time_elapsed

MANIFEST_FILE = "manifest.json"
MANIFEST_PREFIX = "# manifest="

# Artifact names of the pipeline stages.
PATH_CSV = "path.csv"
OBSERVATIONS_CSV = "observations.csv"
TICKS_CSV = "ticks.csv"
SCHEDULE_JSON = "schedule.json"
FILTERED_CSV = "filtered.csv"
FILTER_JSON = "filter_report.json"
CALIBRATION_CSV = "calibration.csv"
CALIBRATION_JSON = "calibration_report.json"
DEPENDENCE_JSON = "dependence.json"
SURFACE_JSON = "surface.json"
SURFACE_CSV = "surface_grid.csv"
PRICES_JSON = "prices.json"
QUOTE_TAPE_CSV = "quote_tape.csv"
PNL_LEDGER_CSV = "pnl_ledger.csv"
QUOTE_JSON = "quote_report.json"
BENCH_JSON = "bench.json"
BENCH_TXT = "bench.txt"


class ArtifactStore:
    """The ArtifactStore class is responsible for the files of one run directory.

    Every CSV starts with a `# manifest=<id>` line and every JSON file carries the
    manifest id and the resolved config. Timings live only in `manifest.json`, so stage
    outputs are byte-stable for a fixed config and seed.
    """

    def __init__(self, root: Union[str, Path], config: RunConfig):
        """Open (and create) the run directory for a resolved config."""
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.config = config
        self._config_echo = config.model_dump(by_alias=True)
        self.config_hash = stable_hash(self._config_echo)
        self.manifest_id = stable_hash({"config": self._config_echo, "seed": config.seed, "version": __version__})
        self._outputs: Dict[str, list] = {}
        self._stages: Dict[str, float] = {}

    def path(self, name: str) -> Path:
        """Absolute path of an artifact in the run directory."""
        return self.root / name

    def _note(self, stage: Optional[str], name: str) -> None:
        if stage is not None:
            self._outputs.setdefault(stage, [])
            if name not in self._outputs[stage]:
                self._outputs[stage].append(name)

    def write_csv(self, name: str, frame: pd.DataFrame, stage: Optional[str] = None) -> Path:
        """Write a frame behind the manifest line."""
        path = self.path(name)
        with path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(f"{MANIFEST_PREFIX}{self.manifest_id}\n")
            frame.to_csv(handle, index=False)
        self._note(stage, name)
        logger.debug("Wrote %s (%d rows).", path, len(frame))
        return path

    def read_csv(
        self,
        source: Union[str, Path],
        columns: Iterable[str] = (),
        producer: str = "simulate",
    ) -> pd.DataFrame:
        """Read a CSV from the run directory (or an explicit path) and check its columns.

        Args:
            source: Artifact name in the run directory, or a path to any CSV.
            columns: Columns the caller needs.
            producer: Subcommand that writes the artifact, named in the missing-file error.

        Raises:
            MissingArtifactError: The file does not exist.
            SchemaMismatchError: A required column is absent.
        """
        path = Path(source)
        if not path.is_absolute() and len(path.parts) == 1:
            path = self.path(path.name)
        if not path.exists():
            raise MissingArtifactError(str(path), producer)
        with path.open("r", encoding="utf-8") as handle:
            first = handle.readline()
        skip = 1 if first.startswith("#") else 0
        frame = pd.read_csv(path, skiprows=skip)
        missing = set(columns) - set(frame.columns)
        if missing:
            raise SchemaMismatchError(str(path), missing, list(frame.columns))
        return frame

    def write_json(self, name: str, payload: Dict[str, Any], stage: Optional[str] = None) -> Path:
        """Write a payload with the manifest id and the config echo."""
        path = self.path(name)
        document = {"manifest_id": self.manifest_id, "config": self._config_echo, **payload}
        path.write_text(json.dumps(document, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
        self._note(stage, name)
        logger.debug("Wrote %s.", path)
        return path

    def write_text(self, name: str, text: str, stage: Optional[str] = None) -> Path:
        """Write a plain text report."""
        path = self.path(name)
        path.write_text(text.rstrip("\n") + "\n", encoding="utf-8")
        self._note(stage, name)
        return path

    def read_json(self, name: str, producer: str) -> Dict[str, Any]:
        """Read a JSON artifact.

        Raises:
            MissingArtifactError: The file does not exist.
        """
        path = self.path(name)
        if not path.exists():
            raise MissingArtifactError(str(path), producer)
        return json.loads(path.read_text(encoding="utf-8"))

    def note_output(self, name: str, stage: str) -> None:
        """Record a file written by another writer, such as a chart."""
        self._note(stage, name)

    @contextmanager
    def stage(self, name: str) -> Iterator["ArtifactStore"]:
        """Time a stage and update the manifest when it finishes."""
        start = time.perf_counter()
        logger.info("Starting stage '%s' in %s.", name, self.root)
        yield self
        self._stages[name] = time_elapsed(start)
        self.write_manifest()
        logger.info("Finished stage '%s' in %ss.", name, self._stages[name])

    def load_manifest(self) -> Optional[RunManifest]:
        """The manifest on disk, if any."""
        path = self.path(MANIFEST_FILE)
        if not path.exists():
            return None
        return RunManifest(**json.loads(path.read_text(encoding="utf-8")))

    def write_manifest(self) -> RunManifest:
        """Merge this session's stages into `manifest.json`."""
        now = datetime.now(timezone.utc).isoformat()
        previous = self.load_manifest()
        stages = dict(previous.stages) if previous and previous.manifest_id == self.manifest_id else {}
        outputs = dict(previous.outputs) if previous and previous.manifest_id == self.manifest_id else {}
        stages.update(self._stages)
        outputs.update(self._outputs)
        seeds = sorted({self.config.seed, *self.config.bench.seeds})
        manifest = RunManifest(
            manifest_id=self.manifest_id,
            config_hash=self.config_hash,
            version=__version__,
            seeds=seeds,
            created_at=previous.created_at if previous and previous.manifest_id == self.manifest_id else now,
            updated_at=now,
            stages=stages,
            outputs=outputs,
        )
        self.path(MANIFEST_FILE).write_text(json.dumps(manifest.model_dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return manifest
