"""Monte Carlo verification suites connecting SGD runs to the limit theory.

Every check produces a :class:`VerificationReport` whose pass flag is a
pure function of (statistic, target-normalized deviations, tolerance):
each statistic entry is a non-negative deviation measure and the report
passes iff every entry is at most its tolerance.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from sgdfluct import linalg
from sgdfluct.asymptotics import sigma_limit, sup_bound, transition_moments, drift, diffusion_matrix
from sgdfluct.diffusion import LimitParams, cross_covariance, sample_exact_paths
from sgdfluct.models import ProblemModel
from sgdfluct.rng import SeedLike, derive, make_rng
from sgdfluct.sgd import StepSchedule, run_replications


@dataclass
class VerificationReport:
    """Structured outcome of one statistical or deterministic check."""

    name: str
    model: str
    params: dict
    statistic: dict
    tolerance: dict
    tolerance_basis: str
    passed: bool
    wall_seconds: float
    target: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "name": self.name,
            "model": self.model,
            "params": self.params,
            "statistic": self.statistic,
            "target": self.target,
            "tolerance": self.tolerance,
            "tolerance_basis": self.tolerance_basis,
            "passed": self.passed,
            "details": self.details,
            "note": self.note,
        }
        # wall time is volatile; exclude it so serialized artifacts are
        # byte-identical across reruns
        if include_timing:
            out["wall_seconds"] = self.wall_seconds
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)


def evaluate_pass(statistic: dict, tolerance: dict) -> bool:
    """Recompute a report's pass flag from its statistic/tolerance dicts."""
    return all(statistic[key] <= tolerance[key] for key in tolerance)


def _finish(
    name: str,
    model: str,
    params: dict,
    statistic: dict,
    tolerance: dict,
    basis: str,
    t0: float,
    details: Optional[dict] = None,
    note: str = "",
) -> VerificationReport:
    return VerificationReport(
        name=name,
        model=model,
        params=params,
        statistic=statistic,
        tolerance=tolerance,
        tolerance_basis=basis,
        passed=evaluate_pass(statistic, tolerance),
        wall_seconds=time.perf_counter() - t0,
        # all statistics are deviation measures, so the common target is 0
        target={key: 0.0 for key in statistic},
        details=details or {},
        note=note,
    )


def _default_theta0(model: ProblemModel, offset: float = 0.5) -> np.ndarray:
    return model.minimizer + offset * np.ones(model.dim)


def clt_check(
    model: ProblemModel,
    delta: float,
    n: int,
    n_reps: int,
    base_seed: SeedLike,
    theta0: Optional[Sequence[float]] = None,
    rel_tol: float = 0.10,
    mean_se_multiple: float = 4.0,
) -> VerificationReport:
    """Empirical covariance of sqrt(n)(theta_n - theta*) against the closed-form limit."""
    t0 = time.perf_counter()
    params = {"delta": delta, "n": n, "M": n_reps, "base_seed": str(base_seed)}
    if n_reps < 100:
        return VerificationReport(
            name="clt",
            model=model.name,
            params=params,
            statistic={"insufficient_replications": 1.0},
            tolerance={"insufficient_replications": 0.0},
            tolerance_basis="guard",
            passed=False,
            wall_seconds=time.perf_counter() - t0,
            target={"insufficient_replications": 0.0},
            note="insufficient replications (need M >= 100)",
        )
    limit = LimitParams.from_model(model, delta)
    sigma = sigma_limit(limit)
    theta0 = _default_theta0(model) if theta0 is None else np.asarray(theta0, float)
    schedule = StepSchedule.delta_over_n(delta)
    result = run_replications(model, schedule, theta0, n, n_reps, base_seed)
    z = math.sqrt(n) * (result.finals - model.minimizer)
    mean = z.mean(axis=0)
    se = z.std(axis=0, ddof=1) / math.sqrt(n_reps)
    mean_units = float(np.max(np.abs(mean) / np.maximum(se, 1e-300)))
    emp_cov = np.cov(z, rowvar=False).reshape(model.dim, model.dim)
    gap = linalg.operator_norm(0.5 * (emp_cov + emp_cov.T) - sigma)
    sigma_op = linalg.operator_norm(sigma)
    # noiseless models have sigma = 0; fall back to the absolute norm
    rel_err = gap / sigma_op if sigma_op > 0.0 else gap
    statistic = {"cov_rel_op_norm": rel_err, "mean_se_units": mean_units}
    tolerance = {"cov_rel_op_norm": rel_tol, "mean_se_units": mean_se_multiple}
    details = {
        "empirical_cov": emp_cov.tolist(),
        "sigma": sigma.tolist(),
        "mean": mean.tolist(),
        "mean_se": se.tolist(),
    }
    return _finish(
        "clt", model.name, params, statistic, tolerance,
        "relative operator norm; Monte Carlo SE multiples", t0, details,
    )


def _interpolated_rescaled(
    recorded: np.ndarray,
    record_indices: np.ndarray,
    n: int,
    grid: np.ndarray,
    theta_star: np.ndarray,
) -> np.ndarray:
    """Y^n_t for each replication and grid time from recorded iterates."""
    pos = {int(k): i for i, k in enumerate(record_indices)}
    out = np.empty((recorded.shape[0], grid.size, theta_star.size))
    for g, t in enumerate(grid):
        nt = n * float(t)
        k = math.ceil(nt)
        yk = (k / math.sqrt(n)) * (recorded[:, pos[k], :] - theta_star)
        ykm1 = ((k - 1) / math.sqrt(n)) * (recorded[:, pos[k - 1], :] - theta_star)
        out[:, g, :] = (k - nt) * ykm1 + (nt - k + 1) * yk
    return out


def fdd_check(
    model: ProblemModel,
    delta: float,
    n: int,
    n_reps: int,
    grid: Sequence[float],
    base_seed: SeedLike,
    theta0: Optional[Sequence[float]] = None,
    se_multiple: float = 5.0,
) -> VerificationReport:
    """Finite-dimensional covariances of the rescaled path against the kernel."""
    t0 = time.perf_counter()
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be strictly increasing")
    if grid[0] <= 0.0 or grid[-1] > 1.0:
        raise ValueError("grid must lie in (0, 1]")
    if n * grid[0] < 100:
        raise ValueError("n * min(grid) must be >= 100 to clear the initial regime")
    params = {
        "delta": delta, "n": n, "M": n_reps,
        "grid": grid.tolist(), "base_seed": str(base_seed),
    }
    limit = LimitParams.from_model(model, delta)
    theta0 = _default_theta0(model) if theta0 is None else np.asarray(theta0, float)
    record = sorted({k for t in grid for k in (math.ceil(n * t) - 1, math.ceil(n * t))})
    schedule = StepSchedule.delta_over_n(delta)
    result = run_replications(
        model, schedule, theta0, n, n_reps, base_seed, record_indices=record
    )
    paths = _interpolated_rescaled(
        result.recorded, result.record_indices, n, grid, model.minimizer
    )
    d = model.dim
    flat = paths.reshape(n_reps, grid.size * d)
    centered = flat - flat.mean(axis=0)
    max_units = 0.0
    deviations = []
    for a in range(grid.size):
        for b in range(a, grid.size):
            target = cross_covariance(limit, float(grid[a]), float(grid[b]))
            for i in range(d):
                for j in range(d):
                    u = centered[:, a * d + i]
                    v = centered[:, b * d + j]
                    emp = float(np.mean(u * v)) * n_reps / (n_reps - 1)
                    se = float(np.std(u * v, ddof=1)) / math.sqrt(n_reps)
                    units = abs(emp - target[i, j]) / max(se, 1e-300)
                    deviations.append(
                        {"s": float(grid[a]), "t": float(grid[b]), "i": i, "j": j,
                         "empirical": emp, "target": float(target[i, j]),
                         "se": se, "se_units": units}
                    )
                    max_units = max(max_units, units)
    statistic = {"max_cov_se_units": max_units}
    tolerance = {"max_cov_se_units": se_multiple}
    return _finish(
        "fdd", model.name, params, statistic, tolerance,
        "Monte Carlo SE multiples", t0, {"entries": deviations},
    )


def consistency_check(
    model: ProblemModel,
    schedule: StepSchedule,
    n_list: Sequence[int],
    n_reps: int,
    base_seed: SeedLike,
    theta0: Optional[Sequence[float]] = None,
) -> VerificationReport:
    """Median and 95th percentile of ||theta_n - theta*|| strictly decreasing along n_list."""
    t0 = time.perf_counter()
    n_list = [int(n) for n in n_list]
    if sorted(n_list) != n_list or len(n_list) < 2:
        raise ValueError("n_list must be increasing with at least two entries")
    params = {"schedule": schedule.kind, "n_list": n_list, "M": n_reps,
              "base_seed": str(base_seed)}
    theta0 = _default_theta0(model, 1.0) if theta0 is None else np.asarray(theta0, float)
    result = run_replications(
        model, schedule, theta0, n_list[-1], n_reps, base_seed, record_indices=n_list
    )
    dists = np.sqrt(
        np.sum((result.recorded - model.minimizer) ** 2, axis=2)
    )  # (M, len(n_list))
    medians = np.median(dists, axis=0)
    q95 = np.quantile(dists, 0.95, axis=0)
    violations = float(np.sum(np.diff(medians) >= 0.0) + np.sum(np.diff(q95) >= 0.0))
    statistic = {"monotonicity_violations": violations}
    tolerance = {"monotonicity_violations": 0.0}
    details = {"medians": medians.tolist(), "q95": q95.tolist()}
    return _finish(
        "consistency", model.name, params, statistic, tolerance,
        "strict monotone decrease", t0, details,
    )


def tightness_check(
    model: ProblemModel,
    delta: float,
    n_list: Sequence[int],
    n_reps: int,
    c_multiplier: float,
    base_seed: SeedLike,
    theta0: Optional[Sequence[float]] = None,
) -> VerificationReport:
    """Tail probabilities of sqrt(n)||theta_n - theta*|| below a Chebyshev budget."""
    t0 = time.perf_counter()
    n_list = [int(n) for n in n_list]
    params = {"delta": delta, "n_list": n_list, "M": n_reps,
              "C_multiplier": c_multiplier, "base_seed": str(base_seed)}
    limit = LimitParams.from_model(model, delta)
    budget = 1.0 / c_multiplier ** 2
    if budget >= 1.0:
        return VerificationReport(
            name="tightness",
            model=model.name,
            params=params,
            statistic={"vacuous_budget": 1.0},
            tolerance={"vacuous_budget": 0.0},
            tolerance_basis="guard",
            passed=False,
            wall_seconds=time.perf_counter() - t0,
            target={"vacuous_budget": 0.0},
            note="Chebyshev budget 1/C_multiplier^2 >= 1 certifies nothing; "
            "use C_multiplier > 1",
        )
    threshold = c_multiplier * math.sqrt(float(np.trace(sigma_limit(limit))))
    theta0 = _default_theta0(model) if theta0 is None else np.asarray(theta0, float)
    schedule = StepSchedule.delta_over_n(delta)
    result = run_replications(
        model, schedule, theta0, n_list[-1], n_reps, base_seed, record_indices=n_list
    )
    stats = []
    for idx, n in enumerate(n_list):
        z = math.sqrt(n) * np.sqrt(
            np.sum((result.recorded[:, idx, :] - model.minimizer) ** 2, axis=1)
        )
        stats.append(float(np.mean(z > threshold)))
    statistic = {"max_tail_probability": max(stats)}
    tolerance = {"max_tail_probability": budget}
    return _finish(
        "tightness", model.name, params, statistic, tolerance,
        "Chebyshev budget 1/C_multiplier^2", t0, {"tail_probabilities": stats},
    )


def coefficient_convergence_check(
    model: ProblemModel,
    delta: float,
    n_list: Sequence[int],
    t_grid: Sequence[float],
    y_grid: Sequence[Sequence[float]],
    tol_a: float = 0.02,
    tol_b: float = 0.05,
    mc_samples: int = 0,
    base_seed: Optional[SeedLike] = None,
) -> VerificationReport:
    """Sup-grid errors of (a_n, b_n) against the limit drift/diffusion coefficients."""
    t0 = time.perf_counter()
    n_list = [int(n) for n in n_list]
    if sorted(n_list) != n_list or len(n_list) < 2:
        raise ValueError("n_list must be increasing with at least two entries")
    params = {"delta": delta, "n_list": n_list, "t_grid": list(t_grid),
              "M_mc": mc_samples}
    limit = LimitParams.from_model(model, delta)
    b_target = diffusion_matrix(limit)
    sup_a, sup_b = [], []
    for n in n_list:
        worst_a = worst_b = 0.0
        for t in t_grid:
            for y in y_grid:
                y = np.asarray(y, dtype=float)
                seed = None if base_seed is None else derive(base_seed, n)
                a_n, b_n = transition_moments(
                    model, delta, n, float(t), y, mc_samples=mc_samples, seed=seed
                )
                a_lim = drift(limit, float(t), y)
                worst_a = max(worst_a, float(np.linalg.norm(a_n - a_lim)))
                worst_b = max(worst_b, float(np.sqrt(np.sum((b_n - b_target) ** 2))))
        sup_a.append(worst_a)
        sup_b.append(worst_b)
    violations = float(
        np.sum(np.diff(sup_a) >= 0.0) + np.sum(np.diff(sup_b) >= 0.0)
    )
    statistic = {
        "monotonicity_violations": violations,
        "final_sup_a_error": sup_a[-1],
        "final_sup_b_error": sup_b[-1],
    }
    tolerance = {
        "monotonicity_violations": 0.0,
        "final_sup_a_error": tol_a,
        "final_sup_b_error": tol_b,
    }
    return _finish(
        "coefficient_convergence", model.name, params, statistic, tolerance,
        "absolute final error; strict monotone decrease", t0,
        {"sup_a": sup_a, "sup_b": sup_b},
    )


def brownian_sup_mc_1d(
    horizon: float, n_steps: int, n_paths: int, seed: SeedLike
) -> tuple[float, float]:
    """Monte Carlo (estimate, SE) of E[sup_{0<=t<=T} |B_t|] for scalar Brownian motion.

    Uses Brownian-bridge maxima within each step to remove the grid
    discretization bias of the running extremes.
    """
    rng = make_rng(seed)
    dt = horizon / n_steps
    sup_abs = np.zeros(n_paths)
    b = np.zeros(n_paths)
    for _ in range(n_steps):
        b_next = b + math.sqrt(dt) * rng.standard_normal(n_paths)
        u_max = rng.random(n_paths)
        u_min = rng.random(n_paths)
        diff = b_next - b
        # exact conditional max/min of the bridge over the sub-interval
        seg_max = 0.5 * (b + b_next + np.sqrt(diff ** 2 - 2.0 * dt * np.log(u_max)))
        seg_min = 0.5 * (b + b_next - np.sqrt(diff ** 2 - 2.0 * dt * np.log(u_min)))
        sup_abs = np.maximum(sup_abs, np.maximum(seg_max, -seg_min))
        b = b_next
    est = float(np.mean(sup_abs))
    se = float(np.std(sup_abs, ddof=1)) / math.sqrt(n_paths)
    return est, se


def sup_bound_check(
    params: LimitParams,
    horizon: float,
    grid_size: int,
    n_paths: int,
    base_seed: SeedLike,
    brownian_steps: int = 10_000,
    brownian_paths: int = 20_000,
) -> VerificationReport:
    """Monte Carlo E[sup ||Y||] against the proof-consistent bound, plus the Brownian lemma."""
    t0 = time.perf_counter()
    if grid_size < 100:
        raise ValueError("grid_size must be >= 100")
    run_params = {"T": horizon, "grid_size": grid_size, "M": n_paths,
                  "base_seed": str(base_seed)}
    grid = np.linspace(horizon / grid_size, horizon, grid_size)
    paths = sample_exact_paths(params, grid, n_paths, derive(base_seed, 0))
    sups = np.max(np.sqrt(np.sum(paths ** 2, axis=2)), axis=1)
    estimate = float(np.mean(sups))
    bound = sup_bound(params, horizon, "proof")
    root = linalg.sym_sqrt(params.noise_cov)
    frob = float(np.sqrt(np.sum(root * root)))
    scale = params.delta * frob * math.sqrt(horizon)
    c_hat = estimate / scale if scale > 0.0 else 0.0
    # Brownian lemma: lower bound vs an MC estimate for the diffusion
    # coefficient delta Gamma^{1/2}; exact for d = 1, grid estimate otherwise.
    sigma_cov = params.delta ** 2 * params.noise_cov
    from sgdfluct.asymptotics import brownian_sup_bounds

    lower, _ = brownian_sup_bounds(sigma_cov, horizon)
    if params.dim == 1 and sigma_cov[0, 0] > 0.0:
        scale_1d = math.sqrt(sigma_cov[0, 0])
        est_b, se_b = brownian_sup_mc_1d(
            horizon, brownian_steps, brownian_paths, derive(base_seed, 1)
        )
        brownian_est = scale_1d * est_b
        brownian_se = scale_1d * se_b
    else:
        rng = make_rng(derive(base_seed, 1))
        sq = linalg.sym_sqrt(sigma_cov)
        steps = max(grid_size, 1000)
        dt = horizon / steps
        m = min(n_paths, 20_000)
        b = np.zeros((m, params.dim))
        running = np.zeros(m)
        for _ in range(steps):
            b = b + math.sqrt(dt) * rng.standard_normal((m, params.dim)) @ sq.T
            running = np.maximum(running, np.sqrt(np.sum(b ** 2, axis=1)))
        brownian_est = float(np.mean(running))
        brownian_se = float(np.std(running, ddof=1)) / math.sqrt(m)
    ratio = estimate / bound if bound > 0.0 else 0.0
    lower_excess = (lower - brownian_est) / max(brownian_se, 1e-300) if lower > 0 else 0.0
    statistic = {
        "sup_over_bound_ratio": ratio,
        "brownian_lower_excess_se_units": max(lower_excess, 0.0),
    }
    tolerance = {
        "sup_over_bound_ratio": 1.0,
        "brownian_lower_excess_se_units": 3.0,
    }
    details = {
        "estimate": estimate,
        "bound": bound,
        "empirical_constant": c_hat,
        "brownian_estimate": brownian_est,
        "brownian_se": brownian_se,
        "brownian_lower_bound": lower,
    }
    return _finish(
        "sup_bound", "limit_diffusion", run_params, statistic, tolerance,
        "one-sided bound; Monte Carlo SE multiples", t0, details,
    )


def exit_probability_check(
    model: ProblemModel,
    delta: float,
    n: int,
    t: float,
    y: Sequence[float],
    radius: float,
    mc_samples: int,
    seed: SeedLike,
) -> VerificationReport:
    """Opt-in estimate of n * P(one rescaled increment leaves B(y, r)).

    Resolving probabilities of order 1/n needs O(n) samples per point, so
    this check is not part of the default suite.
    """
    t0 = time.perf_counter()
    y = np.asarray(y, dtype=float)
    k = math.floor(n * t)
    if k < 2:
        raise ValueError("floor(n t) must be >= 2")
    theta_eval = model.minimizer + math.sqrt(n) * y / (k - 1)
    xs = model.sample_data(mc_samples, seed)
    g = model.subgradient(xs, theta_eval)
    increment = y / k - (delta / math.sqrt(n)) * g
    prob = float(np.mean(np.sqrt(np.sum(increment ** 2, axis=1)) > radius))
    statistic = {"n_times_exit_probability": n * prob}
    tolerance = {"n_times_exit_probability": 1.0}
    return _finish(
        "exit_probability", model.name,
        {"delta": delta, "n": n, "t": t, "r": radius, "M": mc_samples},
        statistic, tolerance, "vanishing-tail budget", t0,
    )
