"""Rescaled trajectories: the discrete chain k/sqrt(n) * (theta_k - theta*)
and its piecewise-linear interpolation in continuous time."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import math

import numpy as np

from sgdfluct.sgd import Trajectory


@dataclass(frozen=True)
class RescaledPath:
    """Values of the rescaled chain at indices 0..K; entry 0 is exactly 0."""

    n: int
    theta_star: np.ndarray
    values: np.ndarray  # (K + 1, d)

    @property
    def max_index(self) -> int:
        return self.values.shape[0] - 1

    def evaluate(self, t: float) -> np.ndarray:
        """Linear interpolation at time t, using the cell (k-1)/n < t <= k/n."""
        if t <= 0.0:
            raise ValueError("t must be positive")
        nt = self.n * t
        k = math.ceil(nt)
        if k > self.max_index:
            raise ValueError(
                f"t = {t} needs index {k}, but only {self.max_index} available"
            )
        if k < 1:
            k = 1
        return (k - nt) * self.values[k - 1] + (nt - k + 1) * self.values[k]

    def sample_on_grid(self, grid: Sequence[float]) -> np.ndarray:
        """Row i holds evaluate(grid[i]); the grid must be increasing and positive."""
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("grid must be a non-empty 1-D sequence")
        if grid[0] <= 0.0 or np.any(np.diff(grid) <= 0.0):
            raise ValueError("grid must be strictly increasing and positive")
        return np.stack([self.evaluate(float(t)) for t in grid])

    def to_csv(self, path, grid: Sequence[float]) -> None:
        """Write `t,y_1,...,y_d` rows for the given evaluation grid."""
        values = self.sample_on_grid(grid)
        d = values.shape[1]
        header = "t," + ",".join(f"y_{i + 1}" for i in range(d))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for t, row in zip(grid, values):
                fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")


def rescale(trajectory: Trajectory, n: int, theta_star: Sequence[float]) -> RescaledPath:
    """Build the rescaled chain k/sqrt(n) * (theta_k - theta*) from a full trajectory."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if trajectory.stride != 1:
        raise ValueError("rescaling requires a stride-1 trajectory")
    theta_star = np.asarray(theta_star, dtype=float)
    k = trajectory.indices.astype(float)[:, None]
    values = (k / math.sqrt(n)) * (trajectory.iterates - theta_star)
    if not np.all(np.isfinite(values)):
        raise ValueError("rescaled values must be finite")
    return RescaledPath(n=n, theta_star=theta_star, values=values)
