"""Tests for the rescaled chain and its piecewise-linear interpolation."""

import numpy as np
import pytest

from sgdfluct.models import ModelSpec, build_model
from sgdfluct.rescaling import RescaledPath, rescale
from sgdfluct.sgd import StepSchedule, run_sgd


def _toy_path(n=10, dim=2, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((n + 1, dim))
    values[0] = 0.0
    return RescaledPath(n=n, theta_star=np.zeros(dim), values=values)


def _trajectory(n=16, dim=2, seed=1):
    model = build_model(
        ModelSpec(kind="laplace_median", dim=dim, curvature=np.eye(dim), noise_cov=np.eye(dim))
    )
    traj = run_sgd(model, StepSchedule.delta_over_n(2.0), np.ones(dim), n, seed)
    return model, traj


class TestRescale:
    def test_zero_prefactor_at_k_zero(self):
        model, traj = _trajectory()
        path = rescale(traj, 16, model.minimizer)
        assert np.array_equal(path.values[0], np.zeros(2))

    def test_hand_values(self):
        # n=4, k=2: prefactor 2/sqrt(4) = 1; n=100, k=100: prefactor 10
        model, traj = _trajectory(n=4)
        path = rescale(traj, 4, model.minimizer)
        assert np.allclose(path.values[2], traj.iterates[2])

        indices = np.arange(101)
        iterates = np.zeros((101, 2))
        iterates[100] = [0.05, -0.02]
        traj.indices, traj.iterates, traj.n_steps = indices, iterates, 100
        path = rescale(traj, 100, np.zeros(2))
        assert np.allclose(path.values[100], [0.5, -0.2])

    def test_scaling_identity(self):
        model, traj = _trajectory(n=20)
        path_n = rescale(traj, 20, model.minimizer)
        path_4n = rescale(traj, 80, model.minimizer)
        assert np.allclose(path_n.values, 2.0 * path_4n.values)

    def test_rejects_strided_trajectory(self):
        model, traj = _trajectory()
        traj.stride = 2
        with pytest.raises(ValueError):
            rescale(traj, 16, model.minimizer)


class TestEvaluate:
    def test_lattice_endpoint(self):
        path = _toy_path()
        for k in range(1, 11):
            assert np.allclose(path.evaluate(k / 10.0), path.values[k])

    def test_midpoint(self):
        path = _toy_path()
        mid = path.evaluate(4.5 / 10.0)
        assert np.allclose(mid, 0.5 * (path.values[4] + path.values[5]))

    def test_first_cell_uses_zero_anchor(self):
        # n=10, t=0.05: k=1, value = 0.5*Y_0 + 0.5*Y_1 = 0.5*Y_1
        path = _toy_path()
        assert np.allclose(path.evaluate(0.05), 0.5 * path.values[1])

    def test_piecewise_linearity(self):
        path = _toy_path()
        t0, t1 = 0.31, 0.39
        tm = 0.5 * (t0 + t1)
        middle = 0.5 * (path.evaluate(t0) + path.evaluate(t1))
        assert np.max(np.abs(path.evaluate(tm) - middle)) <= 1e-12

    def test_domain_errors(self):
        path = _toy_path()
        with pytest.raises(ValueError):
            path.evaluate(0.0)
        with pytest.raises(ValueError):
            path.evaluate(1.0001)


class TestSampleOnGrid:
    def test_singleton_equals_evaluate(self):
        path = _toy_path()
        assert np.allclose(path.sample_on_grid([0.37]), path.evaluate(0.37))

    def test_lattice_grid_reproduces_values(self):
        path = _toy_path()
        grid = np.arange(1, 11) / 10.0
        assert np.allclose(path.sample_on_grid(grid), path.values[1:])

    def test_rejects_bad_grid(self):
        path = _toy_path()
        with pytest.raises(ValueError):
            path.sample_on_grid([0.5, 0.4])
        with pytest.raises(ValueError):
            path.sample_on_grid([0.0, 0.5])

    def test_csv_schema(self, tmp_path):
        path = _toy_path()
        target = tmp_path / "grid.csv"
        path.to_csv(target, [0.5, 1.0])
        data = np.genfromtxt(target, delimiter=",", names=True)
        assert data.dtype.names == ("t", "y_1", "y_2")
        assert np.allclose(
            np.column_stack([data["y_1"], data["y_2"]]),
            path.sample_on_grid([0.5, 1.0]),
        )
