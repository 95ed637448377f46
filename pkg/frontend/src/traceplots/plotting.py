"""Render convergence figures from delimited benchmark traces.

The figures are derived artifacts: this module only reads CSV files (the
benchmark harness's schema: one header row of metric names, one row per
logged iteration, floats in round-trip form) and writes an image.  No
numeric verdicts are computed here.
"""

import ast
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class PlotError(Exception):
    """Raised for unusable plot specifications or malformed inputs."""


@dataclass
class PlotSpec:
    """What to draw: which CSV columns, on what scale, to which file.

    ``bound`` is an optional arithmetic expression in the x-column name
    and the entries of ``constants``; when present it is overlaid as a
    reference curve.
    """

    inputs: list
    x: str
    y: str
    output: str
    scale: str = "log"
    bound: str = None
    constants: dict = field(default_factory=dict)
    labels: list = None
    title: str = None

    def __post_init__(self):
        if not self.inputs:
            raise PlotError("at least one input CSV is required")
        if self.scale not in ("linear", "log"):
            raise PlotError("scale must be 'linear' or 'log', got %r"
                            % self.scale)
        if self.labels is not None and len(self.labels) != len(self.inputs):
            raise PlotError("need one label per input (%d inputs, %d labels)"
                            % (len(self.inputs), len(self.labels)))


def spec_from_dict(d):
    """Build a PlotSpec from a parsed JSON object, rejecting junk keys."""
    allowed = {"inputs", "x", "y", "output", "scale", "bound", "constants",
               "labels", "title"}
    unknown = set(d) - allowed
    if unknown:
        raise PlotError("unknown spec fields: %s" % ", ".join(sorted(unknown)))
    for key in ("inputs", "x", "y", "output"):
        if key not in d:
            raise PlotError("spec is missing required field %r" % key)
    return PlotSpec(**d)


# ---------------------------------------------------------------------------
# CSV input

def read_columns(path, names):
    """Read the named columns from one trace CSV as float arrays."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotError("%s is empty" % path)
        missing = [n for n in names if n not in reader.fieldnames]
        if missing:
            raise PlotError(
                "%s has no column(s) %s; available: %s"
                % (path, ", ".join(missing), ", ".join(reader.fieldnames)))
        rows = list(reader)
    if not rows:
        raise PlotError("%s has a header but no data rows" % path)
    out = {}
    for n in names:
        try:
            out[n] = np.array([float(r[n]) for r in rows])
        except (TypeError, ValueError):
            raise PlotError("column %r in %s is not numeric" % (n, path))
    return out


# ---------------------------------------------------------------------------
# reference-bound expressions

_FUNCS = {"sqrt": math.sqrt, "log": math.log, "log2": math.log2,
          "exp": math.exp, "abs": abs, "min": min, "max": max}

_BINOPS = {ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b,
           ast.Mult: lambda a, b: a * b, ast.Div: lambda a, b: a / b,
           ast.Pow: lambda a, b: a ** b}


def _eval_node(node, names):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id not in names:
            raise PlotError("unknown name %r in bound expression" % node.id)
        return names[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, names),
                                      _eval_node(node.right, names))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        val = _eval_node(node.operand, names)
        return val if isinstance(node.op, ast.UAdd) else -val
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and not node.keywords:
        return _FUNCS[node.func.id](*[_eval_node(a, names) for a in node.args])
    raise PlotError("unsupported syntax in bound expression")


def eval_bound(expr, x_name, x_values, constants):
    """Evaluate an arithmetic bound expression pointwise over the x column."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise PlotError("cannot parse bound expression: %s" % exc)
    out = []
    for xv in np.asarray(x_values, dtype=float):
        names = dict(constants)
        names[x_name] = float(xv)
        try:
            out.append(float(_eval_node(tree.body, names)))
        except (ArithmeticError, ValueError) as exc:
            raise PlotError("bound expression failed at %s=%g: %s"
                            % (x_name, xv, exc))
    return np.array(out)


# ---------------------------------------------------------------------------
# figures

def build_figure(spec):
    """Assemble the matplotlib figure for a spec (no file output)."""
    fig, axis = plt.subplots(figsize=(6.0, 4.0))
    for idx, path in enumerate(spec.inputs):
        cols = read_columns(path, [spec.x, spec.y])
        label = spec.labels[idx] if spec.labels else Path(path).stem
        axis.plot(cols[spec.x], cols[spec.y], marker=".", label=label)
    if spec.bound:
        xref = read_columns(spec.inputs[0], [spec.x])[spec.x]
        axis.plot(xref, eval_bound(spec.bound, spec.x, xref, spec.constants),
                  linestyle="--", color="black", label="bound")
    if spec.scale == "log":
        axis.set_xscale("log")
        axis.set_yscale("log")
    axis.set_xlabel(spec.x)
    axis.set_ylabel(spec.y)
    if spec.title:
        axis.set_title(spec.title)
    axis.legend()
    fig.tight_layout()
    return fig


def render(spec):
    """Render the figure to ``spec.output`` and return the output path.

    Re-rendering an unchanged spec reproduces the file byte for byte (the
    backend is pinned to Agg and no timestamps are embedded).
    """
    fig = build_figure(spec)
    out = Path(spec.output)
    try:
        fig.savefig(out, dpi=150, metadata={"Software": "traceplots"})
    finally:
        plt.close(fig)
    return out
