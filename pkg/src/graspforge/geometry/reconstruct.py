"""Iso-surface extraction and low-shrinkage mesh smoothing."""

from __future__ import annotations

import numpy as np
from scipy import sparse
from skimage import measure

from .mesh import TriangleMesh
from .voxel import VoxelGrid

__all__ = ["marching_cubes", "smooth_mesh"]


def _pair_faces_around_edge(edge, face_ids, verts, faces):
    """Group the faces of a non-manifold edge into 2-face sheets.

    Faces are sorted radially around the edge; each face is paired with the
    neighbor on its solid side (the side its outward normal points away
    from), which reconstructs the sheets that merely touch at this edge.
    """
    a, b = edge
    va, vb = verts[a], verts[b]
    d = vb - va
    d = d / np.linalg.norm(d)
    mid = (va + vb) / 2.0

    entries = []
    for fi in face_ids:
        tri = verts[faces[fi]]
        centroid = tri.mean(axis=0)
        wing = centroid - mid
        wing = wing - np.dot(wing, d) * d
        norm = np.linalg.norm(wing)
        wing = wing / norm if norm > 0 else wing
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        entries.append((fi, wing, n))

    ref = entries[0][1]
    u = ref - np.dot(ref, d) * d
    u = u / np.linalg.norm(u)
    v_axis = np.cross(d, u)
    order = sorted(
        entries,
        key=lambda e: np.arctan2(np.dot(e[1], v_axis), np.dot(e[1], u)),
    )
    # does face 0's solid side lie toward increasing angle?
    fi0, w0, n0 = order[0]
    tau0 = np.cross(d, w0)
    start = 0 if np.dot(-n0, tau0) > 0 else -1
    pairs = []
    for i in range(start, start + len(order), 2):
        pairs.append((order[i % len(order)][0], order[(i + 1) % len(order)][0]))
    return pairs


def _drop_coincident_pairs(faces):
    """Remove face pairs that share the same vertices with opposite winding.

    These zero-thickness membranes appear when adjacent cubes both emit an
    internal ambiguity face; the pair contributes no volume and breaks the
    two-faces-per-edge contract.
    """
    groups = {}
    for fi, f in enumerate(faces):
        groups.setdefault(tuple(sorted(f)), []).append(fi)
    drop = set()
    for fis in groups.values():
        if len(fis) >= 2:
            drop.update(fis[: 2 * (len(fis) // 2)])
    if not drop:
        return faces
    keep = [fi for fi in range(len(faces)) if fi not in drop]
    return faces[keep]


def _split_nonmanifold(verts, faces):
    """Duplicate pinch vertices so every edge borders exactly two faces.

    Where surface sheets touch along an edge or at a vertex (diagonal voxel
    contacts produce this), the incident faces of each pinch vertex are
    grouped into sheets (manifold edges connect directly; non-manifold
    edges connect only radially-paired faces) and every sheet beyond the
    first receives its own coincident vertex copy.  Positions are
    untouched, so volume and area are preserved exactly.
    """
    edge_faces = {}
    for fi, f in enumerate(faces):
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            key = (a, b) if a < b else (b, a)
            edge_faces.setdefault(key, []).append(fi)
    if all(len(v) == 2 for v in edge_faces.values()):
        return verts, faces

    pairings = {}
    for key, fs in edge_faces.items():
        if len(fs) > 2 and len(fs) % 2 == 0:
            pairings[key] = _pair_faces_around_edge(key, fs, verts, faces)

    vertex_faces = {}
    for fi, f in enumerate(faces):
        for v in f:
            vertex_faces.setdefault(int(v), []).append(fi)

    faces = faces.copy()
    new_verts = [verts]
    next_id = len(verts)
    for v, incident in vertex_faces.items():
        if len(incident) < 2:
            continue
        parent = {fi: fi for fi in incident}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(fa, fb):
            ra, rb = find(fa), find(fb)
            if ra != rb:
                parent[ra] = rb

        for (a, b), fs in edge_faces.items():
            if v not in (a, b):
                continue
            if len(fs) == 2:
                union(fs[0], fs[1])
            elif len(fs) > 2:
                for fa, fb in pairings.get((a, b), []):
                    union(fa, fb)
            # single-face (open boundary) edges give no adjacency
        comps = {}
        for fi in incident:
            comps.setdefault(find(fi), []).append(fi)
        groups = sorted(comps.values(), key=min)
        for extra in groups[1:]:
            new_verts.append(verts[v : v + 1])
            for fi in extra:
                faces[fi][faces[fi] == v] = next_id
            next_id += 1
    return np.concatenate(new_verts, axis=0), faces


def _drop_unreferenced_vertices(verts, faces):
    used = np.zeros(len(verts), dtype=bool)
    used[faces.ravel()] = True
    if used.all():
        return verts, faces
    remap = np.cumsum(used) - 1
    return verts[used], remap[faces]


def marching_cubes(grid: VoxelGrid, iso_level: float = 0.5) -> TriangleMesh:
    """Extract the iso-surface of an occupancy grid as a triangle mesh.

    Cell centers act as the scalar lattice, so output vertices live at
    ``origin + (index + 0.5) * voxel_size``.  A grid without any iso
    crossing (all empty or all full) yields an empty mesh.  Pinch points
    where sheets touch are split so the result is always a closed
    2-manifold for boundary-clear binary grids.
    """
    if grid.resolution < 2:
        raise ValueError("marching cubes needs resolution >= 2")
    if not 0.0 < iso_level < 1.0:
        raise ValueError(f"iso level must lie in (0, 1), got {iso_level}")
    occ = grid.occupancy
    if occ.min() >= iso_level or occ.max() <= iso_level:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    verts, faces, _, _ = measure.marching_cubes(occ, level=iso_level)
    faces = _drop_coincident_pairs(faces.astype(np.int64))
    verts, faces = _split_nonmanifold(verts, faces)
    verts, faces = _drop_unreferenced_vertices(verts, faces)
    verts = grid.origin + (verts + 0.5) * grid.voxel_size
    return TriangleMesh(verts, faces)


def _uniform_adjacency(n_vertices, faces):
    """Sparse row-normalized vertex adjacency (mean of edge neighbors)."""
    edges = np.concatenate(
        [faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0
    )
    both = np.concatenate([edges, edges[:, ::-1]], axis=0)
    pairs = np.unique(both, axis=0)
    data = np.ones(len(pairs))
    adj = sparse.csr_matrix(
        (data, (pairs[:, 0], pairs[:, 1])), shape=(n_vertices, n_vertices)
    )
    deg = np.asarray(adj.sum(axis=1)).ravel()
    deg[deg == 0.0] = 1.0
    inv = sparse.diags(1.0 / deg)
    return inv @ adj


def smooth_mesh(mesh: TriangleMesh, iterations: int, alpha: float = 0.0,
                beta: float = 0.5) -> TriangleMesh:
    """Laplacian smoothing with a pull-back correction that fights shrinkage.

    Each iteration averages neighbor positions, then subtracts a blend of
    the vertex's own displacement and its neighbors' displacements
    (weights ``beta`` and ``1 - beta``; ``alpha`` biases the displacement
    reference toward the original positions).  Vertices on open boundary
    edges are kept fixed; topology is never modified.
    """
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    if mesh.is_empty() or iterations == 0:
        return mesh.copy()
    original = mesh.vertices.copy()
    q = mesh.vertices.copy()
    adj = _uniform_adjacency(len(q), mesh.faces)
    pinned = np.array(sorted(mesh.boundary_vertices()), dtype=np.int64)

    for _ in range(iterations):
        p = adj @ q
        if pinned.size:
            p[pinned] = q[pinned]  # open-boundary vertices never move
        b = p - (alpha * original + (1.0 - alpha) * q)
        q = p - (beta * b + (1.0 - beta) * (adj @ b))

    return TriangleMesh(q, mesh.faces.copy())
