"""Mesh and voxel geometry: I/O, voxelization, surface extraction, smoothing,
clustering-based completeness, and PCA report projection."""

from .completeness import (
    DEFAULT_CLUSTER_RADIUS,
    DEFAULT_MIN_POINTS,
    CompletenessReport,
    completeness,
)
from .mesh import TriangleMesh, load_mesh, save_mesh
from .projection import pca_project
from .reconstruct import marching_cubes, smooth_mesh
from .voxel import GRID_MAGIC, GRID_VERSION, VoxelGrid, load_grid, save_grid, voxelize

__all__ = [
    "TriangleMesh", "load_mesh", "save_mesh",
    "VoxelGrid", "voxelize", "save_grid", "load_grid", "GRID_MAGIC", "GRID_VERSION",
    "marching_cubes", "smooth_mesh",
    "CompletenessReport", "completeness", "DEFAULT_CLUSTER_RADIUS", "DEFAULT_MIN_POINTS",
    "pca_project",
]
