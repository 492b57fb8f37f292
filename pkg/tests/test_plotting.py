import numpy as np
import pytest

from lmtsim.harness import ResultTable
from lmtsim.plotting import emit_plot


def make_table(label, values, std=None):
    T = len(values)
    columns = {
        "t": np.arange(T, dtype=float),
        "consensus_x": np.array(values),
        "consensus_y": np.full(T, np.nan),
        "grad_norm_avg": np.array(values),
        "grad_norm_avg_std": np.array(std if std is not None else np.zeros(T)),
        "opt_gap_mean": np.array(values),
        "opt_gap_mean_std": np.zeros(T),
        "z_dev": np.full(T, np.nan),
        "lyapunov_surrogate": np.full(T, np.nan),
        "d_bar_drift": np.zeros(T),
    }
    return ResultTable(label=label, fingerprint="", seed=0, columns=columns)


def test_single_table_single_polyline(tmp_path):
    path = tmp_path / "p.svg"
    emit_plot([make_table("a", [1.0, 0.1, 0.01])], "grad_norm_avg", str(path))
    svg = path.read_text()
    assert svg.count("<polyline") == 1
    assert svg.startswith("<svg")
    assert "grad_norm_avg" in svg


def test_band_and_legend(tmp_path):
    path = tmp_path / "p.svg"
    emit_plot([make_table("one", [1.0, 0.5], std=[0.1, 0.05]),
               make_table("two", [2.0, 1.0], std=[0.1, 0.05])],
              "grad_norm_avg", str(path))
    svg = path.read_text()
    assert svg.count("<polyline") == 2
    assert svg.count("<polygon") == 2
    assert "one" in svg and "two" in svg


def test_empty_inputs_and_unknown_metric(tmp_path):
    with pytest.raises(ValueError, match="nothing to plot"):
        emit_plot([], "grad_norm_avg", str(tmp_path / "x.svg"))
    with pytest.raises(ValueError, match="unknown metric"):
        emit_plot([make_table("a", [1.0])], "no_such", str(tmp_path / "x.svg"))
    with pytest.raises(ValueError, match="no positive finite"):
        emit_plot([make_table("a", [np.nan, np.nan])], "grad_norm_avg",
                  str(tmp_path / "x.svg"))


def test_deterministic_bytes(tmp_path):
    tables = [make_table("a", [1.0, 0.1, 0.01]), make_table("a", [1.0, 0.1, 0.01])]
    p1, p2 = tmp_path / "1.svg", tmp_path / "2.svg"
    emit_plot(tables, "opt_gap_mean", str(p1), title="same data twice")
    emit_plot(tables, "opt_gap_mean", str(p2), title="same data twice")
    assert p1.read_bytes() == p2.read_bytes()
    # identical series produce identical polylines (overlapping lines)
    svg = p1.read_text()
    lines = [ln for ln in svg.splitlines() if ln.startswith("<polyline")]
    pts = [ln.split('points="')[1].split('"')[0] for ln in lines]
    assert pts[0] == pts[1]
