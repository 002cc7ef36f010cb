"""Vectorized ray/triangle-mesh intersection (Moller-Trumbore)."""

from __future__ import annotations

import numpy as np

__all__ = ["ray_mesh_hits"]

_PARALLEL_EPS = 1e-12


def _chunk_hits(origins, dirs, v0, e1, e2):
    """Hit parameters for a chunk of rays against all triangles.

    Returns a (rays, triangles) matrix of t values, +inf where the ray
    misses the triangle.
    """
    p = np.cross(dirs[:, None, :], e2[None, :, :])
    det = np.einsum("tj,rtj->rt", e1, p)
    ok = np.abs(det) > _PARALLEL_EPS
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = origins[:, None, :] - v0[None, :, :]
    u = np.einsum("rtj,rtj->rt", s, p) * inv
    q = np.cross(s, e1[None, :, :])
    v = np.einsum("rtj,rtj->rt", dirs[:, None, :], q) * inv
    t = np.einsum("tj,rtj->rt", e2, q) * inv
    ok &= (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1.0 + 1e-12)
    return np.where(ok, t, np.inf)


def ray_mesh_hits(origins, dirs, mesh, chunk=256):
    """(rays, faces) matrix of hit parameters t (+inf for misses)."""
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    tri = mesh.vertices[mesh.faces]
    v0 = tri[:, 0]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    out = np.empty((len(origins), len(mesh.faces)))
    for start in range(0, len(origins), chunk):
        sl = slice(start, start + chunk)
        out[sl] = _chunk_hits(origins[sl], dirs[sl], v0, e1, e2)
    return out
