"""Monte-Carlo shots drawn from exact leaf probabilities."""

from __future__ import annotations

import numpy as np

from ..decoder import CLASSES
from .experiments import OutcomeDistribution


def _leaf_weights(dist: OutcomeDistribution) -> np.ndarray:
    w = np.array([leaf[2] for leaf in dist.leaves], float)
    return w / w.sum()


def sample_shots(dist: OutcomeDistribution, n: int, seed: int | None = 0) -> dict:
    """Decoded-class counts of ``n`` shots drawn from the distribution's leaves.

    Args:
        dist: exact distribution with leaves attached.
        n: number of shots (0 gives empty counts).
        seed: RNG seed; the same seed always gives the same counts.
    """
    counts = {c: 0 for c in CLASSES}
    if n <= 0 or not dist.leaves:
        return counts
    rng = np.random.default_rng(seed)
    leaf_counts = rng.multinomial(n, _leaf_weights(dist))
    for (_, cls, _), k in zip(dist.leaves, leaf_counts):
        counts[cls] += int(k)
    return counts


def sample_records(dist: OutcomeDistribution, n: int, seed: int | None = 0) -> list:
    """``n`` raw shot records in a seeded random order."""
    if n <= 0 or not dist.leaves:
        return []
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(dist.leaves), size=n, p=_leaf_weights(dist))
    return [dist.leaves[i][0] for i in idx]
