"""Seed splitting: one 64-bit seed fans out to independent child streams."""
import numpy as np


def child_seeds(seed: int, n: int):
    """``n`` independent child seed sequences derived from ``seed``.

    Child ``i`` depends only on ``(seed, i)``, so restarts and replications
    are reproducible individually and independent of how many are run.
    """
    return [np.random.SeedSequence(seed, spawn_key=(i,)) for i in range(n)]


def child_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
