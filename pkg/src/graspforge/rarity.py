"""Latent-space rarity scoring by neighborhood density ratios.

A shape's local density is the reciprocal mean Euclidean distance to its k
nearest latent neighbors; its rarity score is the mean ratio of the
neighbors' densities to its own.  Scores near 1 mean the shape sits in a
typical-density region; larger scores mark isolated (rare) shapes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RarityConfig", "knn", "local_reachability_density", "rarity_scores"]


@dataclass(frozen=True)
class RarityConfig:
    k: int = 5
    distance_floor: float = 1e-12

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("neighbor count k must be positive")
        if self.distance_floor <= 0.0:
            raise ValueError("distance floor must be positive")


def knn(latents, k: int):
    """Exact k nearest neighbors by Euclidean distance, self excluded.

    Ties are broken toward the lower index.  Returns ``(indices, distances)``
    of shape (n, k) each.
    """
    x = np.asarray(latents, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"latents must be a 2-D array, got shape {x.shape}")
    n = len(x)
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of shapes ({n})")
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    # stable argsort on distances preserves index order among exact ties
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    rows = np.arange(n)[:, None]
    return order, np.sqrt(d2[rows, order])


def local_reachability_density(distances, floor: float = 1e-12):
    """Reciprocal mean distance to the neighbors, floored to avoid blow-ups."""
    d = np.asarray(distances, dtype=np.float64)
    mean = d.mean(axis=-1)
    return 1.0 / np.maximum(mean, floor)


def rarity_scores(latents, config: RarityConfig = RarityConfig()):
    """Density-ratio rarity score per latent vector (aligned array)."""
    idx, dist = knn(latents, config.k)
    density = local_reachability_density(dist, config.distance_floor)
    return density[idx].mean(axis=1) / density
