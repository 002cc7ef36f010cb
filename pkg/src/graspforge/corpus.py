"""Procedural watertight primitives and toy corpus assembly.

The toy corpus substitutes a licensed shape collection at desk scale:
boxes, spheres, cylinders, capsules, L-prisms and thin plates with seeded
random dimensions (meters).  Every primitive is closed and consistently
wound, which the corpus tests assert.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError, MeshFormatError
from .geometry import TriangleMesh, load_mesh, save_mesh

__all__ = [
    "make_box", "make_sphere", "make_cylinder", "make_capsule",
    "make_l_prism", "make_plate", "toy_shape", "build_toy_corpus",
    "write_corpus", "import_corpus", "load_manifest", "TOY_KINDS",
    "MANIFEST_SCHEMA",
]

MANIFEST_SCHEMA = 1

TOY_KINDS = ("box", "sphere", "cylinder", "capsule", "l_prism", "plate")


def _ensure_outward(vertices, faces):
    mesh = TriangleMesh(vertices, faces)
    if mesh.volume() < 0.0:
        mesh = TriangleMesh(mesh.vertices, mesh.faces[:, ::-1])
    return mesh


def make_box(sx, sy, sz) -> TriangleMesh:
    hx, hy, hz = sx / 2.0, sy / 2.0, sz / 2.0
    v = np.array(
        [
            [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
            [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
        ]
    )
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2],          # bottom
            [4, 5, 6], [4, 6, 7],          # top
            [0, 1, 5], [0, 5, 4],          # y-
            [2, 3, 7], [2, 7, 6],          # y+
            [0, 4, 7], [0, 7, 3],          # x-
            [1, 2, 6], [1, 6, 5],          # x+
        ]
    )
    return _ensure_outward(v, f)


def _lathe(profile, segments) -> TriangleMesh:
    """Surface of revolution around z from an axial (z, radius) profile.

    The first and last profile entries must have radius 0 (poles); interior
    entries form full rings.  Produces a closed, consistently wound mesh.
    """
    assert profile[0][1] == 0.0 and profile[-1][1] == 0.0
    rings = profile[1:-1]
    assert all(r > 0.0 for _, r in rings)
    phis = 2.0 * np.pi * np.arange(segments) / segments
    verts = [np.array([0.0, 0.0, profile[0][0]])]
    for z, rad in rings:
        for phi in phis:
            verts.append(np.array([rad * np.cos(phi), rad * np.sin(phi), z]))
    verts.append(np.array([0.0, 0.0, profile[-1][0]]))
    top_pole = 0
    bottom_pole = len(verts) - 1

    def ring_vertex(ring_idx, s):
        return 1 + ring_idx * segments + (s % segments)

    faces = []
    for s in range(segments):
        faces.append([top_pole, ring_vertex(0, s + 1), ring_vertex(0, s)])
    for r in range(len(rings) - 1):
        for s in range(segments):
            a, b = ring_vertex(r, s), ring_vertex(r, s + 1)
            c, d = ring_vertex(r + 1, s), ring_vertex(r + 1, s + 1)
            faces.append([a, b, d])
            faces.append([a, d, c])
    last = len(rings) - 1
    for s in range(segments):
        faces.append([bottom_pole, ring_vertex(last, s), ring_vertex(last, s + 1)])
    return _ensure_outward(np.array(verts), np.array(faces))


def make_sphere(radius, rings=12, segments=16) -> TriangleMesh:
    theta = np.pi * np.arange(rings + 1) / rings
    profile = [(radius * np.cos(t), radius * np.sin(t)) for t in theta]
    profile[0] = (radius, 0.0)
    profile[-1] = (-radius, 0.0)
    return _lathe(profile, segments)


def make_cylinder(radius, height, segments=20) -> TriangleMesh:
    h = height / 2.0
    profile = [(h, 0.0), (h, radius), (-h, radius), (-h, 0.0)]
    return _lathe(profile, segments)


def make_capsule(radius, body_height, rings=6, segments=16) -> TriangleMesh:
    h = body_height / 2.0
    profile = [(h + radius, 0.0)]
    for i in range(1, rings + 1):
        t = 0.5 * np.pi * i / rings
        profile.append((h + radius * np.cos(t), radius * np.sin(t)))
    for i in range(rings):
        t = 0.5 * np.pi * (1.0 + i / rings)
        profile.append((-h + radius * np.cos(t), radius * np.sin(t)))
    profile.append((-h - radius, 0.0))
    return _lathe(profile, segments)


def make_l_prism(width, depth, height, leg_w, leg_d) -> TriangleMesh:
    """Extruded L cross-section; ``leg_w``/``leg_d`` are the inner notch sizes."""
    a, b = width, depth
    a2, b1 = leg_w, leg_d
    assert 0.0 < a2 < a and 0.0 < b1 < b
    poly = np.array(
        [
            [0.0, 0.0], [a, 0.0], [a, b1], [a2, b1], [a2, b], [0.0, b], [0.0, b1],
        ]
    )
    poly -= poly.mean(axis=0)
    cap = [(0, 1, 2), (0, 2, 6), (6, 2, 3), (6, 3, 4), (6, 4, 5)]
    n = len(poly)
    h = height / 2.0
    bottom = np.column_stack([poly, np.full(n, -h)])
    top = np.column_stack([poly, np.full(n, h)])
    verts = np.vstack([bottom, top])
    faces = []
    for i, j, k in cap:
        faces.append([i, k, j])              # bottom cap, facing down
        faces.append([n + i, n + j, n + k])  # top cap, facing up
    for e in range(n):
        a0, a1 = e, (e + 1) % n
        faces.append([a0, a1, n + a1])
        faces.append([a0, n + a1, n + a0])
    return _ensure_outward(verts, np.array(faces))


def make_plate(sx, sy, thickness) -> TriangleMesh:
    return make_box(sx, sy, thickness)


def _random_rotation(rng):
    """Uniform random rotation matrix (QR of a Gaussian, det fixed to +1)."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def toy_shape(kind, rng) -> TriangleMesh:
    """One seeded random primitive of the given kind, dimensions in meters.

    Extent ranges straddle a typical parallel-jaw opening (~8 cm) so grasp
    scores spread over [0, 1] instead of saturating, and every shape gets a
    uniform random orientation, like meshes in a real scanned corpus.
    """
    if kind == "box":
        return make_box(*rng.uniform(0.04, 0.14, size=3))
    if kind == "sphere":
        return make_sphere(rng.uniform(0.025, 0.055))
    if kind == "cylinder":
        return make_cylinder(rng.uniform(0.015, 0.05), rng.uniform(0.05, 0.14))
    if kind == "capsule":
        return make_capsule(rng.uniform(0.015, 0.042), rng.uniform(0.04, 0.10))
    if kind == "l_prism":
        w, d = rng.uniform(0.06, 0.15, size=2)
        return make_l_prism(w, d, rng.uniform(0.03, 0.10),
                            w * rng.uniform(0.3, 0.6), d * rng.uniform(0.3, 0.6))
    if kind == "plate":
        # thick enough to stay resolvable after voxelization at 32^3
        return make_plate(rng.uniform(0.07, 0.15), rng.uniform(0.07, 0.15),
                          rng.uniform(0.009, 0.018))
    raise ValueError(f"unknown toy shape kind {kind!r}")


def build_toy_corpus(count, seed):
    """Deterministic list of (shape_id, kind, mesh)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        kind = TOY_KINDS[i % len(TOY_KINDS)]
        mesh = toy_shape(kind, rng).transformed(rotation=_random_rotation(rng))
        out.append((f"toy-{i:04d}", kind, mesh))
    return out


def write_corpus(entries, out_dir, seed, kind="toy"):
    """Write meshes plus a manifest; returns the manifest dict."""
    out_dir = Path(out_dir)
    mesh_dir = out_dir / "meshes"
    mesh_dir.mkdir(parents=True, exist_ok=True)
    manifest_entries = []
    for shape_id, shape_kind, mesh in entries:
        rel = f"meshes/{shape_id}.obj"
        save_mesh(mesh, out_dir / rel)
        lo, hi = mesh.bounds()
        manifest_entries.append(
            {
                "id": shape_id,
                "path": rel,
                "provenance": "original",
                "shape_kind": shape_kind,
                "physical_extent": float((hi - lo).max()),
                "watertight": mesh.is_watertight(),
            }
        )
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "kind": kind,
        "seed": seed,
        "count": len(manifest_entries),
        "entries": manifest_entries,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def import_corpus(source_dir, out_dir, seed):
    """Ingest a directory of OBJ files; raises DataError listing bad files."""
    source = Path(source_dir)
    files = sorted(source.glob("*.obj"))
    if not files:
        raise DataError(f"no OBJ files found in {source}")
    entries = []
    failures = []
    for i, path in enumerate(files):
        try:
            mesh = load_mesh(path)
        except MeshFormatError as exc:
            failures.append(str(exc))
            continue
        entries.append((f"import-{i:04d}", "import", mesh))
    if failures:
        raise DataError("failed to import: " + "; ".join(failures))
    return write_corpus(entries, out_dir, seed, kind="import")


def load_manifest(path):
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise DataError(f"{path}: unsupported manifest schema {manifest.get('schema')!r}")
    return manifest
