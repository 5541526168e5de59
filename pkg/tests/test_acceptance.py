"""Acceptance suite: one test per primary criterion, one printed line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the pass/fail lines
on the terminal.
"""

import filecmp
import math
import time

import numpy as np

from sgdfluct import cli, linalg
from sgdfluct.asymptotics import compare_variances, sigma_limit
from sgdfluct.diffusion import (
    LimitParams,
    kernel_matrix,
    marginal_covariance,
    sample_exact_paths,
)
from sgdfluct.models import ModelSpec, build_model
from sgdfluct.sgd import StepSchedule
from sgdfluct.verify import (
    brownian_sup_mc_1d,
    clt_check,
    coefficient_convergence_check,
    consistency_check,
    fdd_check,
    sup_bound_check,
    tightness_check,
)

SEED = 20240915


def _report(name, passed, detail):
    status = "PASS" if passed else "FAIL"
    print(f"[{status}] {name}: {detail}")
    assert passed, f"{name}: {detail}"


def _laplace_d2():
    return build_model(
        ModelSpec(kind="laplace_median", dim=2, curvature=np.eye(2), noise_cov=np.eye(2))
    )


def _random_limit_params(rng, max_dim=6):
    d = int(rng.integers(1, max_dim + 1))
    m = rng.standard_normal((d, d))
    hessian = m @ m.T + 0.1 * np.eye(d)
    g = rng.standard_normal((d, d))
    noise = g @ g.T
    lam1 = np.linalg.eigvalsh(hessian)[0]
    delta = rng.uniform(1.01, 10.0) / lam1
    return LimitParams.from_matrices(delta, hessian, noise)


def test_clt_reproduction():
    # laplace d=2, delta=2, n=5e4, M=2000: covariance within 10% of (4/3) I
    t0 = time.perf_counter()
    report = clt_check(_laplace_d2(), 2.0, 50_000, 2000, SEED)
    elapsed = time.perf_counter() - t0
    sigma = np.asarray(report.details["sigma"])
    assert np.allclose(sigma, (4.0 / 3.0) * np.eye(2))
    _report(
        "CLT covariance (laplace d=2, n=5e4, M=2000)",
        report.passed and elapsed <= 300.0,
        f"rel op-norm error {report.statistic['cov_rel_op_norm']:.4f} "
        f"(tol 0.10), {elapsed:.0f}s",
    )


def test_fdd_covariances():
    # same setting on the grid {0.5, 1.0}: Var(Y_1) = 4/3, Cov(Y_0.5, Y_1) = 1/3
    t0 = time.perf_counter()
    report = fdd_check(_laplace_d2(), 2.0, 50_000, 2000, [0.5, 1.0], SEED + 1)
    elapsed = time.perf_counter() - t0
    targets = {e["target"] for e in report.details["entries"]}
    assert any(abs(v - 4.0 / 3.0) < 1e-12 for v in targets)
    assert any(abs(v - 1.0 / 3.0) < 1e-12 for v in targets)
    _report(
        "FCLT finite-dimensional covariances (grid {0.5, 1.0})",
        report.passed and elapsed <= 600.0,
        f"max deviation {report.statistic['max_cov_se_units']:.2f} SE "
        f"(tol 5), {elapsed:.0f}s",
    )


def test_exact_sampler_law():
    param_sets = [
        LimitParams.from_matrices(2.0, np.array([[1.0]]), np.array([[1.0]])),
        LimitParams.from_matrices(
            1.5, np.diag([1.0, 2.0]), np.array([[1.0, 0.5], [0.5, 2.0]])
        ),
        LimitParams.from_matrices(
            3.0,
            np.array([[1.0, 0.2, 0.0], [0.2, 1.5, 0.3], [0.0, 0.3, 2.0]]),
            np.array([[1.0, 0.4, 0.1], [0.4, 1.0, 0.2], [0.1, 0.2, 0.5]]),
        ),
    ]
    grid = [0.25, 0.5, 1.0]
    worst_units = 0.0
    worst_det = 0.0
    for idx, params in enumerate(param_sets):
        paths = sample_exact_paths(params, grid, 10 ** 5, (SEED, 2, idx))
        for g, t in enumerate(grid):
            z = paths[:, g, :]
            target = marginal_covariance(params, t)
            prods = z[:, :, None] * z[:, None, :]
            emp = prods.mean(axis=0)
            se = prods.std(axis=0, ddof=1) / math.sqrt(z.shape[0])
            worst_units = max(worst_units, float(np.max(np.abs(emp - target) / se)))
        gap = np.max(np.abs(sigma_limit(params) - marginal_covariance(params, 1.0)))
        worst_det = max(worst_det, float(gap))
    _report(
        "Exact-sampler law (3 parameter sets, 1e5 paths)",
        worst_units <= 4.0 and worst_det <= 1e-10,
        f"max covariance deviation {worst_units:.2f} SE (tol 4); "
        f"sigma vs marginal at t=1: {worst_det:.2e} (tol 1e-10)",
    )


def test_variance_comparison_sweep():
    rng = np.random.default_rng(SEED + 3)
    all_ok = True
    for _ in range(100):
        report = compare_variances(_random_limit_params(rng))
        all_ok = all_ok and report.pass_psd and report.pass_bound
    scalar = compare_variances(
        LimitParams.from_matrices(2.0, np.array([[1.0]]), np.array([[1.0]]))
    )
    equality = (
        abs(scalar.op_norm_excess - 1.0 / 3.0) <= 1e-12
        and abs(scalar.bound - 1.0 / 3.0) <= 1e-12
    )
    _report(
        "Sigma-Delta comparison (100 random instances, d <= 6)",
        all_ok and equality,
        f"all PSD/bound flags pass; scalar case achieves equality at "
        f"{scalar.op_norm_excess:.12f} = 1/3",
    )


def test_coefficient_rates():
    model = build_model(
        ModelSpec(kind="quadratic_gaussian", dim=2, curvature=np.eye(2), noise_cov=np.eye(2))
    )
    y_grid = [np.array([2.0, 0.0]), np.array([-1.0, 1.0]), np.array([0.5, -0.5])]
    report = coefficient_convergence_check(
        model, 2.0, [100, 1000, 10_000, 100_000], [0.5, 1.0, 2.0], y_grid
    )
    _report(
        "Transition-coefficient rates (quadratic, n up to 1e5)",
        report.passed,
        f"final sup errors a: {report.statistic['final_sup_a_error']:.5f} "
        f"(tol 0.02), b: {report.statistic['final_sup_b_error']:.5f} (tol 0.05)",
    )


def test_kernel_inequalities():
    rng = np.random.default_rng(SEED + 5)
    grid = np.linspace(0.01, 1.0, 100)
    worst = -np.inf
    for _ in range(10):
        params = _random_limit_params(rng, max_dim=4)
        diag = {s: np.diag(kernel_matrix(params, s, s)).copy() for s in grid}
        gamma_ii = np.diag(params.noise_cov_eigen)
        dl = params.delta * params.eigenvalues
        for s in grid:
            for t in grid:
                cross = np.diag(kernel_matrix(params, s, t))
                incr = diag[s] - 2.0 * cross + diag[t]
                slack = incr - params.delta ** 2 * abs(s - t) * gamma_ii
                worst = max(worst, float(np.max(slack)))
                mn, mx = min(s, t), max(s, t)
                # mn^dl mx^(1-dl) = mx exp(dl log(mn/mx)), stable for large dl
                g_val = s - 2.0 * mx * np.exp(dl * np.log(mn / mx)) + t
                slack_g = g_val - (2.0 * dl - 1.0) * abs(s - t)
                worst = max(worst, float(np.max(slack_g)))
    _report(
        "Kernel inequalities (100x100 grid, 10 parameter sets)",
        worst <= 1e-12,
        f"max slack violation {worst:.2e} (tol 1e-12)",
    )


def test_sup_bounds():
    params = LimitParams.from_matrices(2.0, np.array([[1.0]]), np.array([[1.0]]))
    report = sup_bound_check(params, 1.0, 1000, 10_000, SEED + 6)
    est, se = brownian_sup_mc_1d(1.0, 10_000, 20_000, SEED + 7)
    target = math.sqrt(math.pi / 2.0)
    lower = math.sqrt(2.0 / math.pi)
    brownian_ok = abs(est - target) <= 3.0 * se and est > lower
    _report(
        "Sup-norm bounds (1e4 exact paths; Brownian lemma)",
        report.passed and brownian_ok,
        f"E[sup||Y||] {report.details['estimate']:.3f} <= bound "
        f"{report.details['bound']:.1f}; E[sup|B|] {est:.4f} vs sqrt(pi/2) "
        f"{target:.4f} within 3 SE ({3 * se:.4f}) and above sqrt(2/pi)",
    )


def _all_models():
    specs = [
        ModelSpec(kind="quadratic_gaussian", dim=2, curvature=np.eye(2), noise_cov=np.eye(2)),
        ModelSpec(kind="laplace_median", dim=2, curvature=np.eye(2), noise_cov=np.eye(2)),
        ModelSpec(kind="geometric_median_gaussian", dim=2, curvature=np.eye(2), noise_cov=np.eye(2)),
        ModelSpec(kind="huber_location", dim=2, curvature=np.eye(2), noise_cov=np.eye(2)),
    ]
    models = []
    for spec in specs:
        model = build_model(spec)
        lam1 = np.linalg.eigvalsh(model.hessian_at_min)[0]
        models.append((model, 2.0 / lam1))
    return models


def test_consistency_and_tightness():
    n_list = [1000, 10_000, 100_000]
    details = []
    all_ok = True
    for idx, (model, delta) in enumerate(_all_models()):
        cons = consistency_check(
            model, StepSchedule.delta_over_n(delta), n_list, 200, (SEED, 8, idx)
        )
        tight = tightness_check(model, delta, n_list, 500, 10.0, (SEED, 9, idx))
        all_ok = all_ok and cons.passed and tight.passed
        details.append(
            f"{model.name}: medians {'ok' if cons.passed else 'NOT decreasing'}, "
            f"max tail {tight.statistic['max_tail_probability']:.4f}"
        )
    _report(
        "Consistency & tightness (4 models, n up to 1e5)",
        all_ok,
        "; ".join(details),
    )


def test_determinism_across_reruns_and_thread_counts(tmp_path):
    base_args = [
        "--set", "run.n=3000",
        "--set", 'verify.checks=["consistency","tightness"]',
        "--set", "verify.n_list=[100,1000,3000]",
        "--set", "verify.M=100",
    ]
    files = None
    for sub, threads in (("a", "1"), ("b", "4")):
        out = tmp_path / sub
        for command in ("simulate", "figure", "verify", "asymptotics"):
            code = cli.main(
                ["--output-dir", str(out), "--threads", threads] + base_args + [command]
            )
            assert code == 0, command
        names = sorted(p.name for p in out.iterdir())
        files = names if files is None else files
        assert names == files
    matched, mismatched, errors = filecmp.cmpfiles(
        tmp_path / "a", tmp_path / "b", files, shallow=False
    )
    _report(
        "Determinism (rerun, thread counts 1 vs 4)",
        not mismatched and not errors,
        f"{len(matched)} artifacts byte-identical"
        + (f"; mismatched: {mismatched}{errors}" if mismatched or errors else ""),
    )


def test_linear_algebra_sweep():
    rng = np.random.default_rng(SEED + 10)
    worst_rec = worst_orth = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 9))
        a = rng.uniform(-1.0, 1.0, size=(d, d))
        a = 0.5 * (a + a.T)
        vals, q = linalg.eigh_symmetric(a)
        worst_rec = max(worst_rec, float(np.max(np.abs(q @ np.diag(vals) @ q.T - a))))
        worst_orth = max(worst_orth, float(np.max(np.abs(q.T @ q - np.eye(d)))))
    _report(
        "Jacobi eigensolver sweep (1000 matrices)",
        worst_rec <= 1e-10 and worst_orth <= 1e-10,
        f"max reconstruction {worst_rec:.2e}, max orthogonality {worst_orth:.2e} "
        f"(tol 1e-10)",
    )
