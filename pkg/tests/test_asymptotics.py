"""Tests for the closed-form asymptotic quantities and bounds."""

import math

import numpy as np
import pytest
from scipy.integrate import simpson

from sgdfluct.asymptotics import (
    brownian_sup_bounds,
    compare_variances,
    delta_erm,
    diffusion_matrix,
    drift,
    dudley_constant,
    proof_sup_constant,
    sigma_limit,
    sup_bound,
    transition_moments,
)
from sgdfluct.diffusion import LimitParams, marginal_covariance
from sgdfluct.models import ModelSpec, build_model


def _scalar_params(delta=2.0, lam=1.0, gamma=1.0):
    return LimitParams.from_matrices(delta, np.array([[lam]]), np.array([[gamma]]))


def _quadratic_model(dim=1, curvature=None, noise=None):
    return build_model(
        ModelSpec(
            kind="quadratic_gaussian",
            dim=dim,
            curvature=np.eye(dim) if curvature is None else curvature,
            noise_cov=np.eye(dim) if noise is None else noise,
        )
    )


def _sigma_by_quadrature(delta, hessian, noise):
    """Simpson quadrature of delta * int_0^inf e^{t/delta} e^{-tH} G e^{-tH} dt."""
    vals, vecs = np.linalg.eigh(hessian)
    b = vecs.T @ noise @ vecs
    rates = vals[:, None] + vals[None, :] - 1.0 / delta
    horizon = 42.0 / rates.min()
    t = np.linspace(0.0, horizon, 80001)
    integrand = b[None, :, :] * np.exp(-t[:, None, None] * rates[None, :, :])
    tilde = delta * simpson(integrand, x=t, axis=0)
    return vecs @ tilde @ vecs.T


class TestSigmaLimit:
    def test_scalar_case(self):
        assert sigma_limit(_scalar_params())[0, 0] == pytest.approx(4.0 / 3.0)

    def test_zero_noise(self):
        params = LimitParams.from_matrices(2.0, np.eye(2), np.zeros((2, 2)))
        assert np.allclose(sigma_limit(params), 0.0)

    def test_diagonal_case(self):
        params = LimitParams.from_matrices(2.0, np.diag([1.0, 2.0]), np.eye(2))
        assert np.allclose(sigma_limit(params), np.diag([4.0 / 3.0, 4.0 / 7.0]))

    def test_against_quadrature(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            d = int(rng.integers(1, 5))
            m = rng.standard_normal((d, d))
            hessian = m @ m.T + np.eye(d)
            g = rng.standard_normal((d, d))
            noise = g @ g.T
            lam1 = np.linalg.eigvalsh(hessian)[0]
            delta = rng.uniform(1.05, 5.0) / lam1
            params = LimitParams.from_matrices(delta, hessian, noise)
            oracle = _sigma_by_quadrature(delta, hessian, noise)
            sigma = sigma_limit(params)
            assert np.max(np.abs(sigma - oracle)) <= 1e-8 * max(1.0, np.max(np.abs(oracle)))

    def test_equals_marginal_covariance_at_one(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            d = int(rng.integers(1, 6))
            m = rng.standard_normal((d, d))
            hessian = m @ m.T + 0.3 * np.eye(d)
            g = rng.standard_normal((d, d))
            noise = g @ g.T
            lam1 = np.linalg.eigvalsh(hessian)[0]
            params = LimitParams.from_matrices(rng.uniform(1.05, 8.0) / lam1, hessian, noise)
            gap = np.max(np.abs(sigma_limit(params) - marginal_covariance(params, 1.0)))
            assert gap <= 1e-10 * max(1.0, np.max(np.abs(sigma_limit(params))))


class TestDeltaErm:
    def test_identity_hessian(self):
        g = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert np.allclose(delta_erm(np.eye(2), g), g)

    def test_scalar(self):
        assert delta_erm(np.array([[1.0]]), np.array([[1.0]]))[0, 0] == 1.0

    def test_diagonal(self):
        assert np.allclose(
            delta_erm(np.diag([1.0, 2.0]), np.eye(2)), np.diag([1.0, 0.25])
        )

    def test_rejects_singular(self):
        with pytest.raises(ValueError):
            delta_erm(np.zeros((2, 2)), np.eye(2))


class TestCompareVariances:
    def test_scalar_equality(self):
        report = compare_variances(_scalar_params())
        assert report.op_norm_excess == pytest.approx(1.0 / 3.0)
        assert report.bound == pytest.approx(1.0 / 3.0)
        assert report.pass_psd and report.pass_bound

    def test_zero_noise(self):
        params = LimitParams.from_matrices(2.0, np.eye(2), np.zeros((2, 2)))
        report = compare_variances(params)
        assert report.op_norm_excess == 0.0
        assert report.pass_psd and report.pass_bound

    def test_json_fields(self):
        doc = compare_variances(_scalar_params()).to_dict()
        assert set(doc) == {
            "sigma", "delta", "min_eig_excess", "op_norm_excess",
            "bound", "pass_psd", "pass_bound",
        }

    def test_delta_sweep_on_models(self):
        for kind in ("quadratic_gaussian", "laplace_median", "huber_location"):
            model = build_model(
                ModelSpec(kind=kind, dim=2, curvature=np.eye(2), noise_cov=np.eye(2))
            )
            lam1 = np.linalg.eigvalsh(model.hessian_at_min)[0]
            for mult in (1.1, 2.0, 10.0):
                params = LimitParams.from_model(model, mult / lam1)
                report = compare_variances(params)
                assert report.pass_psd and report.pass_bound


class TestCoefficients:
    def test_drift_examples(self):
        params = _scalar_params()
        assert np.allclose(drift(params, 1.0, np.zeros(1)), 0.0)
        assert drift(params, 1.0, np.array([1.0]))[0] == pytest.approx(-1.0)
        with pytest.raises(ValueError):
            drift(params, 0.0, np.zeros(1))

    def test_diffusion_matrix(self):
        params = LimitParams.from_matrices(2.0, np.eye(2), np.eye(2))
        assert np.allclose(diffusion_matrix(params), 4.0 * np.eye(2))

    def test_transition_moment_hand_case(self):
        # quadratic, delta=2, t=1, n=101, y=1: a_n = 101/100 - 2*101/100 = -1.01
        model = _quadratic_model()
        a_n, _ = transition_moments(model, 2.0, 101, 1.0, np.array([1.0]))
        assert a_n[0] == pytest.approx(-1.01)

    def test_zero_point(self):
        model = _quadratic_model()
        a_n, _ = transition_moments(model, 2.0, 100, 1.0, np.zeros(1))
        assert np.allclose(a_n, 0.0)

    def test_b_n_converges_to_diffusion(self):
        model = _quadratic_model()
        _, b_n = transition_moments(model, 2.0, 10 ** 6, 1.0, np.array([1.0]))
        assert abs(b_n[0, 0] - 4.0) <= 1e-5

    def test_rates_halve_when_n_doubles(self):
        model = _quadratic_model()
        params = LimitParams.from_model(model, 2.0)
        t_grid = [0.5, 1.0, 2.0]
        y_grid = [np.array([2.0]), np.array([-1.0]), np.array([0.5])]
        errors_a, errors_b = [], []
        for n in (100, 200, 400, 800):
            worst_a = worst_b = 0.0
            for t in t_grid:
                for y in y_grid:
                    a_n, b_n = transition_moments(model, 2.0, n, t, y)
                    worst_a = max(worst_a, abs(a_n[0] - drift(params, t, y)[0]))
                    worst_b = max(worst_b, abs(b_n[0, 0] - 4.0))
            errors_a.append(worst_a)
            errors_b.append(worst_b)
        for errs in (errors_a, errors_b):
            for small, big in zip(errs[1:], errs[:-1]):
                assert 0.4 <= small / big <= 0.6

    def test_floor_guard(self):
        model = _quadratic_model()
        with pytest.raises(ValueError):
            transition_moments(model, 2.0, 10, 0.1, np.array([1.0]))

    def test_mc_fallback_required_without_exact_g(self):
        model = build_model(ModelSpec(kind="geometric_median_gaussian", dim=2))
        with pytest.raises(ValueError):
            transition_moments(model, 4.0, 100, 1.0, np.ones(2))
        a_n, b_n = transition_moments(
            model, 4.0, 100, 1.0, np.ones(2), mc_samples=10 ** 4, seed=0
        )
        assert a_n.shape == (2,) and b_n.shape == (2, 2)


class TestSupBounds:
    def test_dudley_constant_bracket(self):
        # independent truncation: exact series to k = 1e5 plus the
        # integration-by-parts tail bracket must contain the cached value
        k = np.arange(2, 10 ** 5 + 1, dtype=float)
        series = float(np.sum(np.sqrt(np.log(k)) * 2.0 * (1.0 / np.sqrt(k - 1.0) - 1.0 / np.sqrt(k))))
        k_max = 10 ** 5
        tail_low = 2.0 * math.sqrt(math.log(k_max)) / math.sqrt(k_max)
        tail_high = tail_low + 2.0 / (math.sqrt(k_max) * math.sqrt(math.log(k_max)))
        c = dudley_constant()
        assert 24.0 * (series + tail_low) <= c <= 24.0 * (series + tail_high)
        assert proof_sup_constant() == pytest.approx(math.sqrt(2.0 + 2.0 * c * c))

    def test_horizon_scaling(self):
        params = _scalar_params()
        assert sup_bound(params, 4.0) == pytest.approx(2.0 * sup_bound(params, 1.0))

    def test_zero_noise(self):
        params = LimitParams.from_matrices(2.0, np.eye(2), np.zeros((2, 2)))
        assert sup_bound(params, 1.0) == 0.0

    def test_constant_modes_differ(self):
        params = LimitParams.from_matrices(2.0, np.eye(2), 4.0 * np.eye(2))
        proof = sup_bound(params, 1.0, "proof")
        stated = sup_bound(params, 1.0, "as_stated")
        frob = math.sqrt(8.0)  # ||Gamma^{1/2}||_F for Gamma = 4 I_2
        assert proof == pytest.approx(stated * math.sqrt(frob))
        with pytest.raises(ValueError):
            sup_bound(params, 1.0, "bogus")

    def test_brownian_bounds_scalar(self):
        lower, upper = brownian_sup_bounds(np.array([[1.0]]), 1.0)
        assert lower == pytest.approx(math.sqrt(2.0 / math.pi))
        # classical reflection-principle value E[sup |B|] = sqrt(pi/2)
        assert lower < math.sqrt(math.pi / 2.0) < upper

    def test_brownian_bounds_zero_horizon(self):
        lower, upper = brownian_sup_bounds(np.eye(2), 0.0)
        assert lower == 0.0 and upper == 0.0

    def test_brownian_bounds_noise_scaling(self):
        l1, u1 = brownian_sup_bounds(np.array([[1.0]]), 1.0)
        l4, u4 = brownian_sup_bounds(np.array([[4.0]]), 1.0)
        assert l4 == pytest.approx(math.sqrt(2.0) * l1)
        assert u4 == pytest.approx(math.sqrt(2.0) * u1)
