import json

import numpy as np
import pytest

from traceplots import PlotError, PlotSpec, build_figure, render
from traceplots.cli import main
from traceplots.plotting import eval_bound, read_columns, spec_from_dict


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture
def trace_csv(tmp_path):
    path = tmp_path / "trace.csv"
    ks = np.arange(1, 21, dtype=float)
    write_csv(path, ["k", "gap", "feas"],
              [(k, 5.0 / k ** 2, 2.0 / k ** 2) for k in ks])
    return path


# ---------------------------------------------------------------------------
# spec validation


def test_spec_requires_inputs_and_known_scale(tmp_path):
    with pytest.raises(PlotError):
        PlotSpec(inputs=[], x="k", y="gap", output="o.png")
    with pytest.raises(PlotError):
        PlotSpec(inputs=["a.csv"], x="k", y="gap", output="o.png",
                 scale="cubist")
    with pytest.raises(PlotError):
        PlotSpec(inputs=["a.csv", "b.csv"], x="k", y="gap", output="o.png",
                 labels=["only one"])


def test_spec_from_dict_rejects_junk_and_missing_fields():
    with pytest.raises(PlotError):
        spec_from_dict({"inputs": ["a.csv"], "x": "k", "y": "gap"})
    with pytest.raises(PlotError):
        spec_from_dict({"inputs": ["a.csv"], "x": "k", "y": "gap",
                        "output": "o.png", "dpi": 600})


# ---------------------------------------------------------------------------
# CSV input


def test_read_columns_roundtrip(trace_csv):
    cols = read_columns(trace_csv, ["k", "gap"])
    assert cols["k"][0] == 1.0 and cols["gap"][3] == 5.0 / 16.0


def test_missing_column_is_a_descriptive_error(trace_csv):
    with pytest.raises(PlotError, match="residual.*available.*gap"):
        read_columns(trace_csv, ["k", "residual"])


def test_empty_trace_is_an_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(PlotError, match="empty"):
        read_columns(empty, ["k"])
    header_only = tmp_path / "header.csv"
    header_only.write_text("k,gap\n", encoding="utf-8")
    with pytest.raises(PlotError, match="no data rows"):
        read_columns(header_only, ["k"])


# ---------------------------------------------------------------------------
# bound expressions


def test_eval_bound_matches_numpy():
    ks = np.arange(1.0, 9.0)
    vals = eval_bound("16*L*R**2/(gamma*k**2)", "k", ks,
                      {"L": 2.0, "R": 3.0, "gamma": 0.5})
    np.testing.assert_allclose(vals, 16 * 2 * 9 / (0.5 * ks ** 2))


def test_eval_bound_rejects_unknown_names_and_calls():
    with pytest.raises(PlotError):
        eval_bound("mystery/k", "k", [1.0], {})
    with pytest.raises(PlotError):
        eval_bound("__import__('os')", "k", [1.0], {})


# ---------------------------------------------------------------------------
# rendering


def test_render_with_bound_overlay(trace_csv, tmp_path):
    out = tmp_path / "fig.png"
    spec = PlotSpec(inputs=[str(trace_csv)], x="k", y="gap",
                    output=str(out), bound="6/k**2")
    render(spec)
    assert out.exists() and out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_two_inputs_two_labeled_curves(trace_csv, tmp_path):
    other = tmp_path / "other.csv"
    write_csv(other, ["k", "gap"], [(k, 1.0 / k) for k in range(1, 21)])
    spec = PlotSpec(inputs=[str(trace_csv), str(other)], x="k", y="gap",
                    output=str(tmp_path / "two.png"),
                    labels=["fast", "slow"], bound="6/k**2")
    fig = build_figure(spec)
    labels = [line.get_label() for line in fig.axes[0].get_lines()]
    assert labels == ["fast", "slow", "bound"]


def test_rendering_is_byte_stable(trace_csv, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    for out in (a, b):
        render(PlotSpec(inputs=[str(trace_csv)], x="k", y="gap",
                        output=str(out), bound="6/k**2", title="gap"))
    assert a.read_bytes() == b.read_bytes()


def test_rendering_reads_inputs_only(trace_csv, tmp_path):
    before = trace_csv.read_bytes()
    render(PlotSpec(inputs=[str(trace_csv)], x="k", y="gap",
                    output=str(tmp_path / "ro.png")))
    assert trace_csv.read_bytes() == before


# ---------------------------------------------------------------------------
# CLI


def test_cli_render_roundtrip(trace_csv, tmp_path, capsys):
    out = tmp_path / "cli.png"
    spec = {"inputs": [str(trace_csv)], "x": "k", "y": "gap",
            "output": str(out), "scale": "log", "bound": "6/k**2"}
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec), encoding="utf-8")
    assert main(["render", "--spec", str(spec_path)]) == 0
    assert str(out) in capsys.readouterr().out
    assert out.exists()


def test_cli_errors_exit_nonzero(trace_csv, tmp_path, capsys):
    spec = {"inputs": [str(trace_csv)], "x": "k", "y": "nope",
            "output": str(tmp_path / "x.png")}
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec), encoding="utf-8")
    assert main(["render", "--spec", str(spec_path)]) == 2
    assert "nope" in capsys.readouterr().err
    assert main(["render", "--spec", str(tmp_path / "missing.json")]) == 2
