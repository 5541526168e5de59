"""Reproducible random-number streams.

Streams are keyed by tuples of integers fed to ``numpy.random.SeedSequence``
and drive a counter-based Philox generator, so per-replication streams are
independent of each other and of the order in which they are consumed.
"""

from __future__ import annotations

import numpy as np

SeedLike = int | tuple[int, ...] | np.random.SeedSequence


def _as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (int, np.integer)):
        return np.random.SeedSequence(int(seed))
    return np.random.SeedSequence([int(k) for k in seed])


def derive(base_seed: SeedLike, index: int) -> tuple[int, ...]:
    """Key of the ``index``-th stream derived from ``base_seed``.

    Derivation is order-independent: stream ``j`` is the same whether or not
    streams ``0..j-1`` were ever instantiated.
    """
    if isinstance(base_seed, np.random.SeedSequence):
        raise TypeError("derive expects an integer or tuple seed")
    if isinstance(base_seed, (int, np.integer)):
        return (int(base_seed), int(index))
    return tuple(int(k) for k in base_seed) + (int(index),)


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Philox generator seeded from an integer or tuple key."""
    return np.random.Generator(np.random.Philox(_as_seed_sequence(seed)))
