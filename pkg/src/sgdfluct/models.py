"""Concrete convex stochastic objectives with subgradient oracles.

Each model packages a data sampler, a (vectorized) subgradient
g(x, theta), the exact mean subgradient G where a closed form exists, and
the ground-truth asymptotic quantities: minimizer, Hessian at the
minimizer, noise covariance at the minimizer, and a quadratic-growth
constant when known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from sgdfluct import linalg
from sgdfluct.rng import SeedLike, make_rng

MODEL_KINDS = (
    "quadratic_gaussian",
    "laplace_median",
    "geometric_median_gaussian",
    "huber_location",
)


def _norm_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(x) / math.sqrt(2.0)))


def _norm_pdf(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ModelSpec:
    """Configuration of a problem model.

    ``curvature`` and ``noise_cov`` apply to the quadratic model;
    ``laplace_scale`` to the Laplace median; ``huber_threshold`` to the
    Huber location model.
    """

    kind: str
    dim: int
    curvature: Optional[np.ndarray] = None
    noise_cov: Optional[np.ndarray] = None
    laplace_scale: float = 1.0
    huber_threshold: float = 1.0

    def validate(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == "geometric_median_gaussian" and self.dim < 2:
            raise ValueError(
                "geometric median requires dim >= 2; use laplace_median or "
                "huber_location in one dimension"
            )
        if self.laplace_scale <= 0.0:
            raise ValueError("laplace_scale must be positive")
        if self.huber_threshold <= 0.0:
            raise ValueError("huber_threshold must be positive")
        if self.kind == "quadratic_gaussian":
            a = linalg.check_symmetric(
                self.curvature if self.curvature is not None else np.eye(self.dim),
                "curvature",
            )
            if a.shape[0] != self.dim:
                raise ValueError("curvature dimension mismatch")
            vals, _ = linalg.eigh_symmetric(a)
            if vals[0] <= 0.0:
                raise ValueError("curvature matrix must be positive definite")
            g = linalg.check_symmetric(
                self.noise_cov if self.noise_cov is not None else np.eye(self.dim),
                "noise_cov",
            )
            if g.shape[0] != self.dim:
                raise ValueError("noise_cov dimension mismatch")
            if not linalg.is_psd(g):
                raise ValueError("noise_cov must be positive semidefinite")


@dataclass(frozen=True)
class ProblemModel:
    """A convex stochastic objective with its ground-truth limit data."""

    name: str
    dim: int
    minimizer: np.ndarray
    hessian_at_min: np.ndarray
    noise_cov: np.ndarray
    sigma_sq: float
    growth_constant: Optional[float] = None
    has_exact_g: bool = True
    has_exact_second_moment: bool = True
    _sample: Callable[[np.random.Generator, int], np.ndarray] = field(repr=False, default=None)
    _subgrad: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False, default=None)
    _mean_subgrad: Optional[Callable[[np.ndarray], np.ndarray]] = field(repr=False, default=None)
    _second_moment: Optional[Callable[[np.ndarray], np.ndarray]] = field(repr=False, default=None)

    def sample_data(self, count: int, seed: SeedLike) -> np.ndarray:
        """``count`` i.i.d. draws from the data law, deterministic in seed."""
        if count < 1:
            raise ValueError("count must be >= 1")
        return self._sample(make_rng(seed), count)

    def sample_with(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw from an existing generator (engine-internal entry point)."""
        return self._sample(rng, count)

    def subgradient(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """g(x, theta); broadcasts over leading axes of ``x`` and ``theta``."""
        return self._subgrad(np.asarray(x, dtype=float), np.asarray(theta, dtype=float))

    def mean_subgradient(self, theta: np.ndarray) -> np.ndarray:
        """Exact G(theta); raises for models without a closed form."""
        if self._mean_subgrad is None:
            raise NotImplementedError(
                f"{self.name} has no exact mean subgradient; "
                "use mean_subgradient_mc"
            )
        return self._mean_subgrad(np.asarray(theta, dtype=float))

    def mean_subgradient_mc(
        self, theta: np.ndarray, n_samples: int, seed: SeedLike
    ) -> np.ndarray:
        """Monte Carlo estimate of G(theta) with a caller-supplied budget."""
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        xs = self.sample_data(n_samples, seed)
        return self.subgradient(xs, np.asarray(theta, dtype=float)).mean(axis=0)

    def second_moment(self, theta: np.ndarray) -> np.ndarray:
        """Exact E[g(X, theta) g(X, theta)^T] where a closed form exists."""
        if self._second_moment is None:
            raise NotImplementedError(
                f"{self.name} has no exact second moment; "
                "use second_moment_mc"
            )
        return self._second_moment(np.asarray(theta, dtype=float))

    def second_moment_mc(
        self, theta: np.ndarray, n_samples: int, seed: SeedLike
    ) -> np.ndarray:
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        gs = self.subgradient(self.sample_data(n_samples, seed), np.asarray(theta))
        return gs.T @ gs / n_samples


def gaussian_inverse_radius_moment(dim: int) -> float:
    """E[1 / ||X||] for X standard normal in R^dim, dim >= 2.

    The norm follows a chi distribution with ``dim`` degrees of freedom,
    so the moment is Gamma((d-1)/2) / (sqrt(2) Gamma(d/2)). For d = 2 this
    is sqrt(pi / 2), the Rayleigh-law value.
    """
    if dim < 2:
        raise ValueError("requires dim >= 2")
    return math.exp(math.lgamma((dim - 1) / 2.0) - math.lgamma(dim / 2.0)) / math.sqrt(2.0)


def _build_quadratic(spec: ModelSpec) -> ProblemModel:
    d = spec.dim
    a = np.array(spec.curvature if spec.curvature is not None else np.eye(d), dtype=float)
    gamma = np.array(spec.noise_cov if spec.noise_cov is not None else np.eye(d), dtype=float)
    chol = linalg.cholesky(gamma)
    theta_star = np.zeros(d)

    def sample(rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.standard_normal((count, d)) @ chol.T

    def subgrad(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return (theta - theta_star) @ a.T + x

    def mean_subgrad(theta: np.ndarray) -> np.ndarray:
        return (theta - theta_star) @ a.T

    def second_moment(theta: np.ndarray) -> np.ndarray:
        g = a @ (theta - theta_star)
        return np.outer(g, g) + gamma

    return ProblemModel(
        name="quadratic_gaussian",
        dim=d,
        minimizer=theta_star,
        hessian_at_min=a,
        noise_cov=gamma,
        sigma_sq=float(np.trace(gamma)),
        growth_constant=linalg.operator_norm(a),
        _sample=sample,
        _subgrad=subgrad,
        _mean_subgrad=mean_subgrad,
        _second_moment=second_moment,
    )


def _build_laplace(spec: ModelSpec) -> ProblemModel:
    d = spec.dim
    b = float(spec.laplace_scale)
    theta_star = np.zeros(d)
    # 1-D median theory: Hessian of E|theta - X| is 2 * density(0) = 1/b.
    hess = np.eye(d) / b
    gamma = np.eye(d)

    def sample(rng: np.random.Generator, count: int) -> np.ndarray:
        u = rng.random((count, d))
        centered = np.clip(u - 0.5, -0.5 + 1e-300, 0.5 - 1e-300)
        return -b * np.sign(centered) * np.log1p(-2.0 * np.abs(centered))

    def subgrad(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return np.sign(theta - x)

    def mean_subgrad(theta: np.ndarray) -> np.ndarray:
        return np.sign(theta) * (1.0 - np.exp(-np.abs(theta) / b))

    def second_moment(theta: np.ndarray) -> np.ndarray:
        g = mean_subgrad(theta)
        m = np.outer(g, g)
        np.fill_diagonal(m, 1.0)
        return m

    return ProblemModel(
        name="laplace_median",
        dim=d,
        minimizer=theta_star,
        hessian_at_min=hess,
        noise_cov=gamma,
        sigma_sq=float(d),
        growth_constant=1.0 / b,
        _sample=sample,
        _subgrad=subgrad,
        _mean_subgrad=mean_subgrad,
        _second_moment=second_moment,
    )


def _build_geometric_median(spec: ModelSpec) -> ProblemModel:
    d = spec.dim
    theta_star = np.zeros(d)
    # For isotropic Gaussian data: Gamma = E[u u^T] = I/d with u = -X/||X||,
    # and H* = E[(I - u u^T)/||X||] = ((d-1)/d) E[1/||X||] I.
    inv_r = gaussian_inverse_radius_moment(d)
    hess = ((d - 1) / d) * inv_r * np.eye(d)
    gamma = np.eye(d) / d

    def sample(rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.standard_normal((count, d))

    def subgrad(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        diff = theta - x
        norms = np.sqrt(np.sum(diff * diff, axis=-1, keepdims=True))
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(norms > 0.0, diff / norms, 0.0)
        return out

    return ProblemModel(
        name="geometric_median_gaussian",
        dim=d,
        minimizer=theta_star,
        hessian_at_min=hess,
        noise_cov=gamma,
        sigma_sq=1.0,
        growth_constant=None,
        has_exact_g=False,
        has_exact_second_moment=False,
        _sample=sample,
        _subgrad=subgrad,
    )


def _build_huber(spec: ModelSpec) -> ProblemModel:
    d = spec.dim
    c = float(spec.huber_threshold)
    theta_star = np.zeros(d)
    p_inside = 2.0 * float(_norm_cdf(c)) - 1.0
    # E[psi_c(X)^2] = E[X^2 1{|X|<=c}] + c^2 P(|X|>c) for X standard normal.
    gamma_scalar = (p_inside - 2.0 * c * float(_norm_pdf(c))) + c * c * (1.0 - p_inside)
    hess = p_inside * np.eye(d)
    gamma = gamma_scalar * np.eye(d)

    def sample(rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.standard_normal((count, d))

    def subgrad(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return np.clip(theta - x, -c, c)

    def _truncated_moments(
        theta: np.ndarray,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        # First two moments of U 1{|U| <= c} with U ~ N(theta_i, 1) per coord.
        alpha = -c - theta
        beta = c - theta
        dphi = _norm_pdf(alpha) - _norm_pdf(beta)
        dcdf = _norm_cdf(beta) - _norm_cdf(alpha)
        m1 = theta * dcdf + dphi
        m2 = (
            theta * theta * dcdf
            + 2.0 * theta * dphi
            + dcdf
            + alpha * _norm_pdf(alpha)
            - beta * _norm_pdf(beta)
        )
        return m1, m2, dcdf, alpha, beta

    def mean_subgrad(theta: np.ndarray) -> np.ndarray:
        m1, _, dcdf, alpha, beta = _truncated_moments(theta)
        return m1 + c * (1.0 - _norm_cdf(beta)) - c * _norm_cdf(alpha)

    def second_moment(theta: np.ndarray) -> np.ndarray:
        g = mean_subgrad(theta)
        _, m2, dcdf, alpha, beta = _truncated_moments(theta)
        diag = m2 + c * c * (1.0 - dcdf)
        m = np.outer(g, g)
        np.fill_diagonal(m, diag)
        return m

    return ProblemModel(
        name="huber_location",
        dim=d,
        minimizer=theta_star,
        hessian_at_min=hess,
        noise_cov=gamma,
        sigma_sq=float(d) * c * c,
        growth_constant=1.0,
        _sample=sample,
        _subgrad=subgrad,
        _mean_subgrad=mean_subgrad,
        _second_moment=second_moment,
    )


_BUILDERS = {
    "quadratic_gaussian": _build_quadratic,
    "laplace_median": _build_laplace,
    "geometric_median_gaussian": _build_geometric_median,
    "huber_location": _build_huber,
}


def build_model(spec: ModelSpec) -> ProblemModel:
    """Instantiate a problem model from its configuration."""
    spec.validate()
    return _BUILDERS[spec.kind](spec)
