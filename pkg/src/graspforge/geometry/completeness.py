"""Fragmentation metric for generated shapes: density clustering of the
occupied voxels, largest cluster = the shape's major part, everything else
(smaller clusters and noise points) counts as outliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.cluster import DBSCAN

from ..errors import DataError
from .voxel import VoxelGrid

__all__ = ["CompletenessReport", "completeness", "DEFAULT_CLUSTER_RADIUS", "DEFAULT_MIN_POINTS"]

# radius 1.8 in voxel units makes neighborhood membership equal 26-connectivity
DEFAULT_CLUSTER_RADIUS = 1.8
DEFAULT_MIN_POINTS = 4


@dataclass(frozen=True)
class CompletenessReport:
    cluster_count: int
    major_cluster_size: int
    total_occupied: int
    outlier_percentage: float


def completeness(grid: VoxelGrid, cluster_radius: float = DEFAULT_CLUSTER_RADIUS,
                 min_points: int = DEFAULT_MIN_POINTS) -> CompletenessReport:
    """Cluster occupied voxel centers and report the outlier share."""
    if not grid.is_binary():
        raise DataError("completeness requires a binary grid")
    points = grid.occupied_indices().astype(np.float64)
    total = len(points)
    if total == 0:
        raise DataError("completeness is undefined for an empty grid")
    labels = DBSCAN(eps=cluster_radius, min_samples=min_points).fit(points).labels_
    cluster_ids = [c for c in np.unique(labels) if c != -1]
    if cluster_ids:
        sizes = {c: int((labels == c).sum()) for c in cluster_ids}
        major = max(sizes.values())
    else:
        major = 0
    outlier_pct = 100.0 * (total - major) / total
    return CompletenessReport(
        cluster_count=len(cluster_ids),
        major_cluster_size=major,
        total_occupied=total,
        outlier_percentage=float(outlier_pct),
    )
