import json

import numpy as np
import pandas as pd

from beliefkit.charts import BENCH_SVG, FILTER_SVG, SIGMA_SVG, bench_qlike, emit_charts


def _write_filtered(root):
    t = np.arange(50, dtype=float)
    pd.DataFrame(
        {"t": t, "y": np.sin(t / 10), "x_hat": np.sin(t / 10), "var_hat": np.full(50, 0.01)}
    ).to_csv(root / "filtered.csv", index=False)


def test_no_outputs_no_charts(tmp_path):
    assert emit_charts(tmp_path) == []


def test_filter_chart_written(tmp_path):
    _write_filtered(tmp_path)
    written = emit_charts(tmp_path)
    assert written == [tmp_path / FILTER_SVG]
    assert (tmp_path / FILTER_SVG).read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_charts_are_byte_stable(tmp_path):
    _write_filtered(tmp_path)
    emit_charts(tmp_path)
    first = (tmp_path / FILTER_SVG).read_bytes()
    emit_charts(tmp_path)
    assert (tmp_path / FILTER_SVG).read_bytes() == first


def test_unreadable_series_is_skipped(tmp_path):
    _write_filtered(tmp_path)
    pd.DataFrame({"t": [0.0, 1.0]}).to_csv(tmp_path / "calibration.csv", index=False)
    written = emit_charts(tmp_path)
    assert tmp_path / FILTER_SVG in written
    assert not (tmp_path / SIGMA_SVG).exists()


def test_sigma_chart_reads_manifest_prefixed_csv(tmp_path):
    frame = pd.DataFrame(
        {"t": np.arange(20.0), "sigma_b2": np.full(20, 0.0025), "gamma": np.r_[np.zeros(19), 0.9]}
    )
    with (tmp_path / "calibration.csv").open("w", encoding="utf-8", newline="") as handle:
        handle.write("# manifest=abc\n")
        frame.to_csv(handle, index=False)
    assert emit_charts(tmp_path, tau_J=0.7) == [tmp_path / SIGMA_SVG]


def test_bench_chart(tmp_path):
    document = {"summary": {"RN-JD": {"qlike": 0.2}, "RW-logit": {"qlike": 0.4}}}
    (tmp_path / "bench.json").write_text(json.dumps(document), encoding="utf-8")
    assert bench_qlike(document) == {"RN-JD": 0.2, "RW-logit": 0.4}
    assert emit_charts(tmp_path) == [tmp_path / BENCH_SVG]
