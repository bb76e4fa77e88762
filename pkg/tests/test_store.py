import json

import pandas as pd
import pytest

from beliefkit.models import MissingArtifactError, RunConfig, SchemaMismatchError
from beliefkit.store import MANIFEST_FILE, MANIFEST_PREFIX, ArtifactStore


@pytest.fixture
def store(tmp_path):
    return ArtifactStore(tmp_path / "run", RunConfig())


def test_csv_starts_with_manifest_line(store):
    path = store.write_csv("a.csv", pd.DataFrame({"t": [0.0, 1.0], "x": [0.1, 0.2]}), "simulate")
    first = path.read_text(encoding="utf-8").splitlines()[0]
    assert first == f"{MANIFEST_PREFIX}{store.manifest_id}"
    frame = store.read_csv("a.csv", ["t", "x"])
    assert list(frame.columns) == ["t", "x"]
    assert len(frame) == 2


def test_csv_output_is_byte_stable(tmp_path):
    frame = pd.DataFrame({"t": [0.0, 1.0], "x": [0.123456789, -2.5]})
    first = ArtifactStore(tmp_path / "a", RunConfig()).write_csv("a.csv", frame)
    second = ArtifactStore(tmp_path / "b", RunConfig()).write_csv("a.csv", frame)
    assert first.read_bytes() == second.read_bytes()


def test_manifest_id_follows_the_config(tmp_path):
    base = ArtifactStore(tmp_path / "a", RunConfig())
    assert ArtifactStore(tmp_path / "b", RunConfig()).manifest_id == base.manifest_id
    assert ArtifactStore(tmp_path / "c", RunConfig(seed=8)).manifest_id != base.manifest_id


def test_missing_artifact_names_its_producer(store):
    with pytest.raises(MissingArtifactError) as excinfo:
        store.read_csv("filtered.csv", producer="filter")
    assert "beliefkit filter" in str(excinfo.value)
    assert excinfo.value.exit_code == 3


def test_missing_json_artifact(store):
    with pytest.raises(MissingArtifactError):
        store.read_json("surface.json", producer="surface")


def test_schema_mismatch_lists_missing_columns(store):
    store.write_csv("a.csv", pd.DataFrame({"t": [0.0]}))
    with pytest.raises(SchemaMismatchError) as excinfo:
        store.read_csv("a.csv", ["t", "y", "meas_var"])
    assert excinfo.value.missing == ["meas_var", "y"]
    assert excinfo.value.exit_code == 3


def test_read_csv_accepts_plain_files(store, tmp_path):
    path = tmp_path / "external.csv"
    pd.DataFrame({"t": [0.0, 1.0]}).to_csv(path, index=False)
    assert len(store.read_csv(str(path), ["t"])) == 2


def test_json_carries_manifest_and_config(store):
    path = store.write_json("report.json", {"value": 1.5}, "price")
    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["manifest_id"] == store.manifest_id
    assert document["config"]["seed"] == 7
    assert document["value"] == 1.5


def test_stage_records_timings_and_outputs(store):
    with store.stage("simulate"):
        store.write_csv("path.csv", pd.DataFrame({"t": [0.0]}), "simulate")
    manifest = store.load_manifest()
    assert manifest.manifest_id == store.manifest_id
    assert "simulate" in manifest.stages
    assert manifest.outputs["simulate"] == ["path.csv"]
    assert manifest.seeds == [7]


def test_manifest_merges_stages_of_one_config(tmp_path):
    root = tmp_path / "run"
    with ArtifactStore(root, RunConfig()).stage("simulate"):
        pass
    with ArtifactStore(root, RunConfig()).stage("filter"):
        pass
    manifest = json.loads((root / MANIFEST_FILE).read_text(encoding="utf-8"))
    assert set(manifest["stages"]) == {"simulate", "filter"}


def test_manifest_resets_when_the_config_changes(tmp_path):
    root = tmp_path / "run"
    with ArtifactStore(root, RunConfig()).stage("simulate"):
        pass
    with ArtifactStore(root, RunConfig(seed=8)).stage("filter"):
        pass
    manifest = json.loads((root / MANIFEST_FILE).read_text(encoding="utf-8"))
    assert set(manifest["stages"]) == {"filter"}
    assert manifest["seeds"] == [8]
