"""Dense symmetric linear algebra for small matrices.

Self-contained eigendecomposition (cyclic Jacobi), semidefinite Cholesky,
symmetric square roots and norms. All routines operate on plain numpy
arrays; dimensions stay small (d <= 10 in practice) so no attempt is made
at blocked or cache-aware kernels.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10
_JACOBI_SWEEP_CAP = 100
_JACOBI_OFF_RTOL = 1e-14
_CHOLESKY_PIVOT_FLOOR = -1e-12


class NotSymmetricError(ValueError):
    """Input matrix fails the symmetry tolerance."""


class NotPositiveSemidefiniteError(ValueError):
    """Input matrix is indefinite beyond floating-point slack."""


class EigenDecomposition(NamedTuple):
    """Spectral factorization A = Q diag(eigenvalues) Q^T.

    ``eigenvalues`` are sorted ascending; the columns of ``eigenvectors``
    form the matching orthonormal basis.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def check_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate and return a square symmetric float array.

    Symmetry tolerance is |a_ij - a_ji| <= 1e-12 * (1 + |a_ij|) entrywise.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetricError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise NotSymmetricError(f"{name} must have dim >= 1")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    if not np.all(np.abs(a - a.T) <= SYMMETRY_RTOL * (1.0 + np.abs(a))):
        raise NotSymmetricError(f"{name} is not symmetric within tolerance")
    return a


def frobenius_norm(a: np.ndarray) -> float:
    """Square root of the sum of squared entries."""
    a = check_symmetric(a)
    return float(np.sqrt(np.sum(a * a)))


def eigh_symmetric(a: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    1e-14 * ||A||_F; a cap of 100 sweeps guards against malformed input.
    """
    a = check_symmetric(a)
    d = a.shape[0]
    m = 0.5 * (a + a.T)
    q = np.eye(d)
    if d == 1:
        return EigenDecomposition(m[0].copy(), q)
    threshold = _JACOBI_OFF_RTOL * float(np.sqrt(np.sum(m * m)))
    for _ in range(_JACOBI_SWEEP_CAP):
        off = m - np.diag(np.diag(m))
        if np.sqrt(np.sum(off * off)) <= threshold:
            break
        for p in range(d - 1):
            for r in range(p + 1, d):
                apr = m[p, r]
                if apr == 0.0:
                    continue
                diff = m[r, r] - m[p, p]
                if abs(apr) < 1e-300 * abs(diff):
                    continue
                # classic Jacobi angle: stable formula for tan(theta)
                if diff == 0.0:
                    t = 1.0
                else:
                    w = diff / (2.0 * apr)
                    t = -np.sign(w) / (abs(w) + np.sqrt(w * w + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, -s], [s, c]])
                rows = m[[p, r], :]
                m[[p, r], :] = rot.T @ rows
                cols = m[:, [p, r]]
                m[:, [p, r]] = cols @ rot
                m[p, r] = 0.0
                m[r, p] = 0.0
                q[:, [p, r]] = q[:, [p, r]] @ rot
    else:
        raise ValueError("Jacobi iteration did not converge; input malformed")
    vals = np.diag(m).copy()
    order = np.argsort(vals, kind="stable")
    return EigenDecomposition(vals[order], q[:, order])


def operator_norm(a: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a symmetric matrix."""
    vals, _ = eigh_symmetric(a)
    return float(np.max(np.abs(vals)))


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = A for positive semidefinite A.

    Pivots in [-1e-12, 0) are clamped to zero (the matching column is
    zeroed); a pivot below -1e-12 raises ``NotPositiveSemidefiniteError``.
    """
    a = check_symmetric(a)
    d = a.shape[0]
    lower = np.zeros((d, d))
    for j in range(d):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot < _CHOLESKY_PIVOT_FLOOR:
            raise NotPositiveSemidefiniteError(
                f"pivot {pivot:.3e} at column {j} below tolerance"
            )
        if pivot <= 0.0:
            continue
        ljj = np.sqrt(pivot)
        lower[j, j] = ljj
        if j + 1 < d:
            lower[j + 1 :, j] = (
                a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]
            ) / ljj
    return lower


def sym_sqrt(a: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via the eigenbasis.

    Eigenvalues in [-1e-10 * ||A||_op, 0) are treated as zero; anything
    more negative raises ``NotPositiveSemidefiniteError``.
    """
    vals, q = eigh_symmetric(a)
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    floor = -PSD_RTOL * max(scale, 1e-300)
    if np.any(vals < floor):
        raise NotPositiveSemidefiniteError(
            f"eigenvalue {vals.min():.3e} below PSD tolerance"
        )
    root = q @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ q.T
    return 0.5 * (root + root.T)


def is_psd(a: np.ndarray, rtol: float = PSD_RTOL) -> bool:
    """True when all eigenvalues exceed -rtol * ||A||_op."""
    vals, _ = eigh_symmetric(a)
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    return bool(np.all(vals >= -rtol * max(scale, 1e-300)))
