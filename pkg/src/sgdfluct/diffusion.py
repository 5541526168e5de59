"""The limiting time-inhomogeneous Gaussian diffusion.

The process solves dY_t = t^{-1}(I - delta H*) Y_t dt + delta Gamma^{1/2} dB_t
with Y_t -> 0 as t -> 0. In the eigenbasis of H* its coordinates are
independent scaled stochastic integrals, which gives a closed-form
covariance kernel and exact Gaussian transitions; an Euler-Maruyama
sampler is kept as a cross-validation reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from sgdfluct import linalg
from sgdfluct.models import ProblemModel
from sgdfluct.rng import SeedLike, make_rng


@dataclass(frozen=True)
class LimitParams:
    """Spectral data of the limit diffusion.

    ``eigenvalues`` are the ascending eigenvalues of the Hessian at the
    minimizer, ``basis`` the matching orthonormal eigenvector matrix, and
    ``noise_cov_eigen`` the noise covariance rotated into that basis.
    """

    delta: float
    eigenvalues: np.ndarray
    basis: np.ndarray
    noise_cov: np.ndarray
    noise_cov_eigen: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def mu(self) -> np.ndarray:
        """Eigenvalues of delta H* - I; all positive when delta lambda_1 > 1."""
        return self.delta * self.eigenvalues - 1.0

    @classmethod
    def from_matrices(
        cls, delta: float, hessian: np.ndarray, noise_cov: np.ndarray
    ) -> "LimitParams":
        hessian = linalg.check_symmetric(hessian, "hessian")
        noise_cov = linalg.check_symmetric(noise_cov, "noise_cov")
        vals, q = linalg.eigh_symmetric(hessian)
        if delta * vals[0] <= 1.0:
            raise ValueError(
                f"delta * lambda_1 = {delta * vals[0]:.6f} must exceed 1"
            )
        if not linalg.is_psd(noise_cov):
            raise ValueError("noise covariance must be positive semidefinite")
        gamma_tilde = q.T @ noise_cov @ q
        gamma_tilde = 0.5 * (gamma_tilde + gamma_tilde.T)
        return cls(
            delta=float(delta),
            eigenvalues=vals,
            basis=q,
            noise_cov=noise_cov,
            noise_cov_eigen=gamma_tilde,
        )

    @classmethod
    def from_model(cls, model: ProblemModel, delta: float) -> "LimitParams":
        return cls.from_matrices(delta, model.hessian_at_min, model.noise_cov)


@dataclass(frozen=True)
class DiffusionPath:
    """A sampled path on a strictly increasing positive time grid."""

    grid: np.ndarray
    values: np.ndarray  # (len(grid), d)
    seed: SeedLike

    def to_csv(self, path) -> None:
        d = self.values.shape[1]
        header = "t," + ",".join(f"y_{i + 1}" for i in range(d))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for t, row in zip(self.grid, self.values):
                fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if grid[0] <= 0.0 or np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be strictly increasing and positive")
    return grid


def kernel_matrix(params: LimitParams, s: float, t: float) -> np.ndarray:
    """E[Z_s Z_t^T] in eigen-coordinates; entry (i, j) is covariance_kernel(i, j, s, t)."""
    if s <= 0.0 or t <= 0.0:
        raise ValueError("times must be positive")
    mu = params.mu
    mn = min(s, t)
    m = mu[:, None] + mu[None, :] + 1.0  # = delta lambda_i + delta lambda_j - 1
    # s^{-mu_i} t^{-mu_j} mn^m computed in log space: the exponent is at most
    # log(mn), so large mu can only underflow (to 0), never overflow
    log_factor = (
        (mu * np.log(mn / s))[:, None]
        + (mu * np.log(mn / t))[None, :]
        + np.log(mn)
    )
    return params.delta ** 2 * params.noise_cov_eigen * np.exp(log_factor) / m


def covariance_kernel(params: LimitParams, i: int, j: int, s: float, t: float) -> float:
    """E[Y_s(i) Y_t(j)] in eigen-coordinates; i, j are 0-based."""
    if not (0 <= i < params.dim and 0 <= j < params.dim):
        raise ValueError("coordinate index out of range")
    return float(kernel_matrix(params, s, t)[i, j])


def marginal_covariance(params: LimitParams, t: float) -> np.ndarray:
    """Covariance of Y_t in ambient coordinates."""
    q = params.basis
    cov = q @ kernel_matrix(params, t, t) @ q.T
    return 0.5 * (cov + cov.T)


def cross_covariance(params: LimitParams, s: float, t: float) -> np.ndarray:
    """E[Y_s Y_t^T] in ambient coordinates."""
    q = params.basis
    return q @ kernel_matrix(params, s, t) @ q.T


def _increment_covariance(params: LimitParams, s: float, t: float) -> np.ndarray:
    """Covariance of the innovation in the exact transition from s to t (s < t).

    With s = 0 this reduces to the marginal covariance at t.
    """
    mu = params.mu
    p = mu[:, None] + mu[None, :]
    m = p + 1.0
    sm = s ** m if s > 0.0 else 0.0
    cov = params.delta ** 2 * params.noise_cov_eigen * t ** (-p) * (t ** m - sm) / m
    return 0.5 * (cov + cov.T)


def sample_exact_paths(
    params: LimitParams,
    grid: Sequence[float],
    n_paths: int,
    seed: SeedLike,
) -> np.ndarray:
    """Exact Gaussian path sampling; returns ambient values of shape (n_paths, |grid|, d).

    Works in eigen-coordinates: the first grid point is drawn from its exact
    marginal, then Z_t = (s/t)^mu * Z_s plus an independent Gaussian
    innovation with the closed-form covariance.
    """
    grid = _check_grid(grid)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    rng = make_rng(seed)
    d = params.dim
    mu = params.mu
    out = np.empty((n_paths, grid.size, d))
    z = np.zeros((n_paths, d))
    prev = 0.0
    for g, t in enumerate(grid):
        chol = linalg.cholesky(_increment_covariance(params, prev, float(t)))
        decay = (prev / t) ** mu if prev > 0.0 else np.zeros(d)
        z = z * decay + rng.standard_normal((n_paths, d)) @ chol.T
        out[:, g, :] = z
        prev = float(t)
    return out @ params.basis.T


def sample_exact(params: LimitParams, grid: Sequence[float], seed: SeedLike) -> DiffusionPath:
    """A single exactly-sampled path (see :func:`sample_exact_paths`)."""
    values = sample_exact_paths(params, grid, 1, seed)[0]
    return DiffusionPath(grid=_check_grid(grid), values=values, seed=seed)


def sample_euler_paths(
    params: LimitParams,
    t_start: float,
    y_start: np.ndarray,
    grid: Sequence[float],
    step_count: int,
    n_paths: int,
    seed: SeedLike,
) -> np.ndarray:
    """Euler-Maruyama reference sampler from (t_start, y_start), ambient coordinates.

    ``y_start`` has shape (d,) (shared start) or (n_paths, d). ``step_count``
    is the total number of uniform sub-steps distributed over
    [t_start, grid[-1]] proportionally to interval lengths.
    """
    grid = _check_grid(grid)
    if t_start <= 0.0:
        raise ValueError("t_start must be positive: the drift is singular at 0")
    if grid[0] <= t_start:
        raise ValueError("grid must start after t_start")
    if step_count < 1:
        raise ValueError("step_count must be >= 1")
    y_start = np.asarray(y_start, dtype=float)
    if y_start.ndim == 1:
        y = np.tile(y_start, (n_paths, 1))
    else:
        y = y_start.copy()
        if y.shape != (n_paths, params.dim):
            raise ValueError("y_start shape mismatch")
    rng = make_rng(seed)
    drift_mat = np.eye(params.dim) - params.delta * (
        params.basis @ np.diag(params.eigenvalues) @ params.basis.T
    )
    diff_mat = params.delta * linalg.sym_sqrt(params.noise_cov)
    total = grid[-1] - t_start
    out = np.empty((n_paths, grid.size, params.dim))
    t = t_start
    for g, t_next in enumerate(grid):
        length = float(t_next) - t
        n_sub = max(1, round(step_count * length / total))
        dt = length / n_sub
        for _ in range(n_sub):
            noise = rng.standard_normal((n_paths, params.dim)) @ diff_mat.T
            y = y + (dt / t) * (y @ drift_mat.T) + np.sqrt(dt) * noise
            t += dt
        t = float(t_next)
        out[:, g, :] = y
    return out


def sample_euler(
    params: LimitParams,
    t_start: float,
    y_start: Sequence[float],
    grid: Sequence[float],
    step_count: int,
    seed: SeedLike,
) -> DiffusionPath:
    """A single Euler-Maruyama path (see :func:`sample_euler_paths`)."""
    values = sample_euler_paths(
        params, t_start, np.asarray(y_start, dtype=float), grid, step_count, 1, seed
    )[0]
    return DiffusionPath(grid=_check_grid(grid), values=values, seed=seed)


def sup_norm_statistic(path: DiffusionPath) -> float:
    """Maximum Euclidean norm over the grid points of a path."""
    if path.values.size == 0:
        raise ValueError("path is empty")
    return float(np.max(np.sqrt(np.sum(path.values ** 2, axis=1))))
