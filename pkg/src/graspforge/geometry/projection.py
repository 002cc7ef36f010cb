"""2-D principal-component projection of latent vectors, for report scatter plots."""

from __future__ import annotations

import numpy as np

__all__ = ["pca_project"]


def pca_project(latents, components: int = 2) -> np.ndarray:
    """Project row vectors onto their top principal components.

    The sign of each component is fixed so its largest-magnitude loading is
    positive, making the output deterministic across runs.
    """
    x = np.asarray(latents, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"latents must be a 2-D array, got shape {x.shape}")
    if len(x) < 2:
        raise ValueError("pca projection needs at least 2 vectors")
    if components < 1 or components > x.shape[1]:
        raise ValueError(f"components must be in [1, {x.shape[1]}]")
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:components]
    flip = np.sign(basis[np.arange(components), np.abs(basis).argmax(axis=1)])
    flip[flip == 0.0] = 1.0
    basis = basis * flip[:, None]
    return centered @ basis.T
