"""Triangle mesh type, Wavefront OBJ I/O, and basic surface queries.

OBJ support is deliberately minimal: ``v x y z`` vertices and ``f i j k``
triangle faces with 1-based indices.  Anything else (quads, negative
indices pointing past the vertex list, malformed numbers) is rejected with
the offending line number.
"""

from __future__ import annotations

import numpy as np

from ..errors import MeshFormatError

__all__ = ["TriangleMesh", "load_mesh", "save_mesh"]


class TriangleMesh:
    """Vertices (N, 3) in meters and faces (M, 3) of vertex indices."""

    def __init__(self, vertices, faces):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ValueError(
                    f"face index out of range (mesh has {len(self.vertices)} vertices)"
                )
            degenerate = (
                (self.faces[:, 0] == self.faces[:, 1])
                | (self.faces[:, 1] == self.faces[:, 2])
                | (self.faces[:, 0] == self.faces[:, 2])
            )
            if degenerate.any():
                bad = int(np.nonzero(degenerate)[0][0])
                raise ValueError(f"degenerate face {bad}: repeated vertex index")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def is_empty(self):
        return self.faces.size == 0

    def copy(self):
        return TriangleMesh(self.vertices.copy(), self.faces.copy())

    def bounds(self):
        """(min_corner, max_corner) of the axis-aligned bounding box."""
        if self.vertices.size == 0:
            raise ValueError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def edge_counts(self):
        """Undirected edge -> incident face count."""
        counts = {}
        for f in self.faces:
            for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                key = (a, b) if a < b else (b, a)
                counts[key] = counts.get(key, 0) + 1
        return counts

    def is_watertight(self):
        """True when every edge borders exactly two faces."""
        if self.is_empty():
            return False
        return all(c == 2 for c in self.edge_counts().values())

    def is_orientable(self):
        """True when every shared edge is traversed once in each direction."""
        seen = set()
        for f in self.faces:
            for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                if (a, b) in seen:
                    return False
                seen.add((a, b))
        return True

    def boundary_vertices(self):
        """Indices of vertices on open edges (edges with a single face)."""
        out = set()
        for (a, b), c in self.edge_counts().items():
            if c != 2:
                out.add(int(a))
                out.add(int(b))
        return out

    def face_normals(self, normalize=True):
        v = self.vertices[self.faces]
        n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        if normalize:
            lengths = np.linalg.norm(n, axis=1, keepdims=True)
            lengths[lengths == 0.0] = 1.0
            n = n / lengths
        return n

    def face_areas(self):
        v = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def surface_area(self):
        return float(self.face_areas().sum())

    def volume(self):
        """Signed volume via the divergence theorem; positive for outward winding."""
        v = self.vertices[self.faces]
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)

    def centroid(self):
        """Area-weighted surface centroid."""
        v = self.vertices[self.faces]
        centers = v.mean(axis=1)
        areas = self.face_areas()
        total = areas.sum()
        if total == 0.0:
            return self.vertices.mean(axis=0)
        return (centers * areas[:, None]).sum(axis=0) / total

    def transformed(self, rotation=None, translation=None, scale=1.0):
        v = self.vertices * float(scale)
        if rotation is not None:
            v = v @ np.asarray(rotation).T
        if translation is not None:
            v = v + np.asarray(translation)
        return TriangleMesh(v, self.faces.copy())


def load_mesh(path) -> TriangleMesh:
    """Parse a triangle-only OBJ file."""
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) != 4:
                    raise MeshFormatError(
                        f"vertex line needs 3 coordinates, got {len(parts) - 1}",
                        path=path, line=lineno,
                    )
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError:
                    raise MeshFormatError(
                        f"unparseable vertex coordinates {parts[1:]!r}", path=path, line=lineno
                    ) from None
            elif tag == "f":
                if len(parts) != 4:
                    raise MeshFormatError(
                        f"face {len(faces)} has {len(parts) - 1} vertices; only triangles are supported",
                        path=path, line=lineno,
                    )
                idx = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshFormatError(
                            f"unparseable face index {token!r}", path=path, line=lineno
                        ) from None
                    if i == 0:
                        raise MeshFormatError("face indices are 1-based", path=path, line=lineno)
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                faces.append(idx)
            elif tag in ("vn", "vt", "o", "g", "s", "mtllib", "usemtl"):
                continue
            else:
                raise MeshFormatError(f"unsupported OBJ directive {tag!r}", path=path, line=lineno)
    try:
        return TriangleMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3), faces)
    except ValueError as exc:
        raise MeshFormatError(str(exc), path=path) from None


def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write an OBJ; repr formatting makes the float64 round-trip exact."""
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        if lines:
            fh.write("\n")
