"""Convergence-figure rendering for benchmark CSV traces."""

from traceplots.plotting import PlotError, PlotSpec, build_figure, render

__all__ = ["PlotError", "PlotSpec", "build_figure", "render"]
