"""Render a figure recipe from duffing-qdyn CSV curves.

CSV loading validates the ``# schema=1`` marker and every referenced column
before any drawing happens; a missing column raises `SchemaError` naming it.
Rendering never mutates inputs, and saved files suppress embedded dates so
reruns are idempotent byte-for-byte (SVG).
"""

from __future__ import annotations

import csv
import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from duffing_plots.errors import SchemaError
from duffing_plots.recipes import FigureRecipe


def load_curve(prefix: str, curve: str) -> dict[str, np.ndarray]:
    """Load PREFIX-<curve>.csv into named columns (floats where possible)."""
    path = f"{prefix}-{curve}.csv"
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    comments = [ln for ln in lines if ln.startswith("#")]
    if not any(ln.replace(" ", "") == "#schema=1" for ln in comments):
        raise SchemaError(f"{path}: missing '# schema=1' marker")
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body:
        raise SchemaError(f"{path}: no header row")
    rows = list(csv.reader(body))
    header, data = rows[0], rows[1:]
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        values = [row[j] for row in data]
        try:
            columns[name] = np.array([float(v) for v in values])
        except ValueError:
            columns[name] = np.array(values)
    return columns


def _column(columns, curve, name, path_hint):
    if name not in columns:
        raise SchemaError(f"{path_hint}: curve {curve!r} has no column {name!r}")
    return columns[name]


def render(recipe: FigureRecipe, prefix: str, out_path: str) -> dict:
    """Draw the recipe from ``prefix`` CSVs into ``out_path``; returns a summary.

    The summary holds panel and series counts, used by callers to verify
    layout expectations.
    """
    curves = {name: load_curve(prefix, name) for name in recipe.inputs}

    # Fixed hash salt keeps SVG element ids (and so the output bytes) stable.
    plt.rcParams["svg.hashsalt"] = "duffing-plots"
    n = recipe.n_panels
    fig, axes = plt.subplots(1, n, figsize=(5.2 * n, 4.0))
    if n == 1:
        axes = [axes]
    summary = {"figure": recipe.figure, "panels": n, "series": []}

    for ax, panel in zip(axes, recipe.panels):
        count = 0
        for series in panel["series"]:
            curve = series["curve"]
            cols = curves[curve]
            kind = series.get("kind", "line")
            label = series.get("label")
            if kind == "heatmap":
                q = _column(cols, curve, series["x"], prefix)
                p = _column(cols, curve, series["y"], prefix)
                g = _column(cols, curve, series["z"], prefix)
                qs, ps = np.unique(q), np.unique(p)
                grid = g.reshape(len(qs), len(ps)).T
                mesh = ax.pcolormesh(qs, ps, grid, shading="auto", cmap="viridis")
                fig.colorbar(mesh, ax=ax, label=series["z"])
            else:
                x = _column(cols, curve, series["x"], prefix)
                y = _column(cols, curve, series["y"], prefix)
                keep = ~(np.isnan(x) | np.isnan(y))
                if kind == "markers":
                    ax.plot(x[keep], y[keep], series.get("marker", "o"),
                            label=label, ms=5, mfc="none")
                elif kind == "fit-line":
                    slope, icpt = np.polyfit(x[keep], y[keep], 1)
                    xs = np.array([x[keep].min(), x[keep].max()])
                    ax.plot(xs, slope * xs + icpt, "--", label=label)
                    ax.annotate(
                        f"slope = {slope:.4g}",
                        xy=(0.05, 0.9 - 0.08 * count),
                        xycoords="axes fraction",
                        fontsize=9,
                    )
                else:
                    ax.plot(x[keep], y[keep], series.get("style", "-"), label=label)
            count += 1
        ax.set_xlabel(panel.get("xlabel", ""))
        ax.set_ylabel(panel.get("ylabel", ""))
        if panel.get("yscale"):
            ax.set_yscale(panel["yscale"])
        if panel.get("title"):
            ax.set_title(panel["title"])
        if any(s.get("label") for s in panel["series"]):
            ax.legend(fontsize=9)
        summary["series"].append(count)

    fig.tight_layout()
    directory = os.path.dirname(out_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    metadata = {"Date": None} if out_path.endswith(".svg") else None
    fig.savefig(out_path, dpi=160, metadata=metadata)
    plt.close(fig)
    return summary
