"""Render the three-panel trajectory figure from CSV exports.

Panels: the full SGD trajectory, the post-burn-in fluctuations (the input
CSV already excludes the early iterations), and the rescaled trajectory.
Points are colored by time, from light (start) to dark (end). The module
only reads CSV files, so it has no dependency on the simulation package.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DEFAULT_TITLES = ("full trajectory", "after burn-in", "rescaled trajectory")


class SchemaError(ValueError):
    """A CSV input does not match the expected column layout."""


@dataclass(frozen=True)
class FigureSpec:
    """Inputs and presentation choices for the three-panel figure.

    ``colormap`` must run from light (early times) to dark (late times),
    e.g. the default sequential "Blues".
    """

    trajectory_csv: str
    zoom_csv: str
    rescaled_csv: str
    output: str
    colormap: str = "Blues"
    titles: tuple[str, str, str] = DEFAULT_TITLES


def _load_csv(path: str, index_column: str, value_prefix: str) -> tuple[np.ndarray, np.ndarray]:
    """Read one panel CSV; returns (index, values) with values of shape (n, d)."""
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read file ({exc})") from exc
    names = data.dtype.names
    if names is None or names[0] != index_column:
        raise SchemaError(
            f"{path}: first column must be {index_column!r}, got "
            f"{names[0] if names else 'nothing'!r}"
        )
    for pos, name in enumerate(names[1:], start=1):
        expected = f"{value_prefix}_{pos}"
        if name != expected:
            raise SchemaError(f"{path}: column {pos + 1} must be {expected!r}, got {name!r}")
    if len(names) < 2:
        raise SchemaError(f"{path}: no {value_prefix}_* value columns")
    data = np.atleast_1d(data)
    if data.shape[0] == 0:
        raise SchemaError(f"{path}: file contains no data rows")
    values = np.column_stack([data[name] for name in names[1:]])
    if not np.all(np.isfinite(values)):
        raise SchemaError(f"{path}: non-finite values in the {value_prefix}_* columns")
    return data[index_column], values


def _draw_panel(ax, index, values, cmap, title):
    """Scatter one panel, colored by position along the path."""
    order = np.linspace(0.0, 1.0, index.size)
    colors = plt.get_cmap(cmap)(0.15 + 0.85 * order)
    if values.shape[1] >= 2:
        ax.scatter(values[:, 0], values[:, 1], c=colors, s=3, linewidths=0)
        ax.set_xlabel("coordinate 1")
        ax.set_ylabel("coordinate 2")
    else:
        ax.scatter(index, values[:, 0], c=colors, s=3, linewidths=0)
        ax.set_ylabel("coordinate 1")
    ax.set_title(title)


def render_figure(spec: FigureSpec) -> Path:
    """Write the three-panel image; returns the output path."""
    panels = [
        _load_csv(spec.trajectory_csv, "k", "theta"),
        _load_csv(spec.zoom_csv, "k", "theta"),
        _load_csv(spec.rescaled_csv, "t", "y"),
    ]
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 4.0))
    try:
        for ax, (index, values), title in zip(axes, panels, spec.titles):
            _draw_panel(ax, index, values, spec.colormap, title)
        fig.tight_layout()
        out = Path(spec.output)
        # fixed metadata keeps repeated renders byte-identical
        fig.savefig(out, dpi=120, metadata={"Software": "sgdplot"})
    finally:
        plt.close(fig)
    return out


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sgdplot",
        description="Render the three-panel trajectory figure from CSV exports.",
    )
    parser.add_argument("--trajectory", required=True, help="full-trajectory CSV (k,theta_*)")
    parser.add_argument("--zoom", required=True, help="post-burn-in trajectory CSV (k,theta_*)")
    parser.add_argument("--rescaled", required=True, help="rescaled-path CSV (t,y_*)")
    parser.add_argument("--output", required=True, help="output image path")
    parser.add_argument("--colormap", default="Blues", help="light-to-dark colormap name")
    parser.add_argument(
        "--titles", nargs=3, default=list(DEFAULT_TITLES), metavar=("T1", "T2", "T3")
    )
    args = parser.parse_args(argv)
    spec = FigureSpec(
        trajectory_csv=args.trajectory,
        zoom_csv=args.zoom,
        rescaled_csv=args.rescaled,
        output=args.output,
        colormap=args.colormap,
        titles=tuple(args.titles),
    )
    try:
        render_figure(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
