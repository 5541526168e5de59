"""The SGD recursion theta_k = theta_{k-1} - t_k g(X_k, theta_{k-1}).

Single trajectories are computed step by step; replication batches are
vectorized across replications (each replication keeps its own derived
random stream, so results are bitwise independent of batching).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from sgdfluct.models import ProblemModel
from sgdfluct.rng import SeedLike, derive, make_rng

_SAMPLE_BLOCK = 4096


class DivergenceError(RuntimeError):
    """An iterate became NaN/Inf; carries the failing index."""

    def __init__(self, index: int, last_finite: np.ndarray, replication: Optional[int] = None):
        where = f"iteration {index}"
        if replication is not None:
            where += f", replication {replication}"
        super().__init__(f"SGD diverged at {where}")
        self.index = index
        self.last_finite = last_finite
        self.replication = replication


@dataclass(frozen=True)
class StepSchedule:
    """Step-size sequence t_k, k >= 1 (the first step uses t_1)."""

    kind: str
    delta: float = 0.0
    c: float = 0.0
    alpha: float = 0.0

    @classmethod
    def delta_over_n(cls, delta: float) -> "StepSchedule":
        if delta <= 0.0:
            raise ValueError("delta must be positive")
        return cls(kind="delta_over_n", delta=float(delta))

    @classmethod
    def power(cls, c: float, alpha: float) -> "StepSchedule":
        # alpha in (1/2, 1] keeps sum t_k divergent and sum t_k^2 finite
        if c <= 0.0:
            raise ValueError("c must be positive")
        if not 0.5 < alpha <= 1.0:
            raise ValueError("alpha must lie in (1/2, 1]")
        return cls(kind="power", c=float(c), alpha=float(alpha))

    def steps(self, first: int, last: int) -> np.ndarray:
        """Step sizes t_first, ..., t_last as a vector."""
        k = np.arange(first, last + 1, dtype=float)
        if self.kind == "delta_over_n":
            return self.delta / k
        if self.kind == "power":
            return self.c * k ** (-self.alpha)
        raise ValueError(f"unknown schedule kind {self.kind!r}")

    def validate_for_fclt(self, model: ProblemModel) -> None:
        """The delta/n schedule supports FCLT analysis only if delta * lambda_1 > 1."""
        if self.kind != "delta_over_n":
            raise ValueError("FCLT experiments require the delta_over_n schedule")
        from sgdfluct.linalg import eigh_symmetric

        lam1 = float(eigh_symmetric(model.hessian_at_min).eigenvalues[0])
        if self.delta * lam1 <= 1.0:
            raise ValueError(
                f"delta * lambda_1 = {self.delta * lam1:.4f} must exceed 1"
            )


@dataclass
class Trajectory:
    """Recorded SGD iterates; index 0 holds theta_0, the last index n_steps."""

    model_name: str
    schedule: StepSchedule
    theta0: np.ndarray
    n_steps: int
    seed: SeedLike
    stride: int
    indices: np.ndarray
    iterates: np.ndarray

    def to_csv(self, path) -> None:
        """Write `k,theta_1,...,theta_d` rows with 17-significant-digit floats."""
        d = self.iterates.shape[1]
        header = "k," + ",".join(f"theta_{i + 1}" for i in range(d))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for k, row in zip(self.indices, self.iterates):
                fh.write(str(int(k)) + "," + ",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass
class ReplicationResult:
    """Final iterates (and optionally recorded intermediate iterates)."""

    finals: np.ndarray  # (M, d)
    record_indices: np.ndarray  # sorted unique iteration indices
    recorded: np.ndarray  # (M, len(record_indices), d)


def run_sgd(
    model: ProblemModel,
    schedule: StepSchedule,
    theta0: Sequence[float],
    n_steps: int,
    seed: SeedLike,
    stride: int = 1,
) -> Trajectory:
    """Run the recursion for ``n_steps`` steps, recording every ``stride``-th iterate.

    Deterministic given (seed, model, schedule, theta0). A non-finite
    iterate raises :class:`DivergenceError` with the failing index.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (model.dim,):
        raise ValueError(f"theta0 must have shape ({model.dim},)")
    rng = make_rng(seed)
    theta = theta0[None, :].copy()
    indices = [0]
    iterates = [theta0.copy()]
    k = 0
    # overflow in a diverging run is reported via DivergenceError below
    with np.errstate(over="ignore", invalid="ignore"):
        while k < n_steps:
            block = min(_SAMPLE_BLOCK, n_steps - k)
            xs = model.sample_with(rng, block)
            ts = schedule.steps(k + 1, k + block)
            for i in range(block):
                theta = theta - ts[i] * model.subgradient(xs[i : i + 1], theta)
                k += 1
                if not np.all(np.isfinite(theta)):
                    raise DivergenceError(k, iterates[-1])
                if k % stride == 0 or k == n_steps:
                    indices.append(k)
                    iterates.append(theta[0].copy())
    # de-duplicate the final index when n_steps % stride == 0
    if len(indices) >= 2 and indices[-1] == indices[-2]:
        indices.pop()
        iterates.pop()
    return Trajectory(
        model_name=model.name,
        schedule=schedule,
        theta0=theta0,
        n_steps=n_steps,
        seed=seed,
        stride=stride,
        indices=np.array(indices, dtype=np.int64),
        iterates=np.array(iterates),
    )


def run_replications(
    model: ProblemModel,
    schedule: StepSchedule,
    theta0: Sequence[float],
    n_steps: int,
    n_reps: int,
    base_seed: SeedLike,
    record_indices: Iterable[int] = (),
    rep_chunk: int = 1024,
) -> ReplicationResult:
    """Independent replications; replication j uses the stream derive(base_seed, j).

    Rows are a pure function of their replication index, so permuting
    indices permutes rows identically and results do not depend on the
    chunking of the batch.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (model.dim,):
        raise ValueError(f"theta0 must have shape ({model.dim},)")
    rec = np.array(sorted(set(int(i) for i in record_indices)), dtype=np.int64)
    if rec.size and (rec[0] < 0 or rec[-1] > n_steps):
        raise ValueError("record_indices must lie in [0, n_steps]")
    slot = {int(idx): s for s, idx in enumerate(rec)}

    d = model.dim
    finals = np.empty((n_reps, d))
    recorded = np.empty((n_reps, rec.size, d))
    for start in range(0, n_reps, rep_chunk):
        stop = min(start + rep_chunk, n_reps)
        m = stop - start
        rngs = [make_rng(derive(base_seed, j)) for j in range(start, stop)]
        theta = np.tile(theta0, (m, 1))
        if 0 in slot:
            recorded[start:stop, slot[0], :] = theta
        k = 0
        xs = np.empty((m, _SAMPLE_BLOCK, d))
        # overflow in a diverging run is reported via DivergenceError below
        with np.errstate(over="ignore", invalid="ignore"):
            while k < n_steps:
                block = min(_SAMPLE_BLOCK, n_steps - k)
                for i, rng in enumerate(rngs):
                    xs[i, :block] = model.sample_with(rng, block)
                ts = schedule.steps(k + 1, k + block)
                for i in range(block):
                    theta = theta - ts[i] * model.subgradient(xs[:, i, :], theta)
                    k += 1
                    s = slot.get(k)
                    if s is not None:
                        recorded[start:stop, s, :] = theta
                if not np.all(np.isfinite(theta)):
                    bad = np.where(~np.isfinite(theta).all(axis=1))[0][0]
                    raise DivergenceError(k, theta0, replication=start + int(bad))
        finals[start:stop] = theta
    return ReplicationResult(finals=finals, record_indices=rec, recorded=recorded)
