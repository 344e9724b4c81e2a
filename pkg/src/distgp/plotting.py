"""Render posterior-band figures from plot-data files.

Figures mirror the usual presentation: the truth as a black line, the
posterior mean as a solid colored line, and the 95% pointwise credible
band shaded between dotted edges.  Rendering always goes through the
plot-data CSV schema (x, f0, mean, lower, upper) so the figures stay a
pure function of the delimited output written next to them.
"""

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

BAND_COLOR = "#3070b3"


def read_plot_data(path):
    cols = {name: [] for name in ("x", "f0", "mean", "lower", "upper")}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            for name in cols:
                cols[name].append(float(row[name]))
    return {name: np.array(vals) for name, vals in cols.items()}


def render_band(ax, data, label=None):
    ax.fill_between(
        data["x"], data["lower"], data["upper"], color=BAND_COLOR, alpha=0.25, lw=0
    )
    ax.plot(data["x"], data["lower"], ":", color=BAND_COLOR, lw=0.8)
    ax.plot(data["x"], data["upper"], ":", color=BAND_COLOR, lw=0.8)
    ax.plot(data["x"], data["mean"], "-", color=BAND_COLOR, lw=1.4, label="mean")
    ax.plot(data["x"], data["f0"], "-", color="black", lw=1.0, label="truth")
    if label:
        ax.set_title(label, fontsize=10)
    ax.set_xlim(data["x"].min(), data["x"].max())


def render_figure(plot_data_path, out_png, title=None):
    """One method's posterior band as a standalone PNG."""
    data = read_plot_data(plot_data_path)
    fig, ax = plt.subplots(figsize=(5.0, 3.2), constrained_layout=True)
    render_band(ax, data, label=title)
    ax.legend(loc="best", fontsize=8)
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def render_panel(plot_data_paths, out_png, title=None):
    """Side-by-side panels, one column per method."""
    names = list(plot_data_paths)
    fig, axes = plt.subplots(
        1, len(names), figsize=(3.1 * len(names), 3.0),
        sharey=True, constrained_layout=True,
    )
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        render_band(ax, read_plot_data(plot_data_paths[name]), label=name)
    if title:
        fig.suptitle(title, fontsize=11)
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png
