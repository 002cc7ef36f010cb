"""Antipodal grasp sampling and wrench-space grasp quality.

Candidates are parallel-jaw contact pairs found by rejection sampling:
pick a surface point, pick an inward direction inside the friction cone,
ray-cast through the solid to the opposing contact, and keep the pair when
both contacts satisfy the friction-cone condition and the jaw width fits.

Quality is the classic smallest-resistible-wrench metric: discretize each
contact's friction cone into unit force edges, form 6-D wrenches about the
centroid with torques scaled by a characteristic length, and measure the
distance from the wrench-space origin to the convex hull boundary (zero
when the origin is not strictly inside).

Two hard point contacts alone can never resist torque about their
connecting axis, so every two-contact hull would be rank deficient and the
metric identically zero.  Like standard grasp simulators we therefore use
a soft-finger contact: each contact contributes a pair of torsional
wrenches about its normal, proportional to the friction coefficient and a
small contact-patch radius.  With friction zero the torsion vanishes and
the degenerate cases stay at quality zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DataError
from .geometry.mesh import TriangleMesh
from .geometry.rays import ray_mesh_hits

__all__ = [
    "GraspConfig",
    "GraspCandidate",
    "sample_antipodal_grasps",
    "ferrari_canny",
    "hull_distance",
    "robust_quality",
    "score_grasps",
    "graspness",
]


@dataclass(frozen=True)
class GraspConfig:
    friction: float = 0.5
    cone_edges: int = 8
    samples_per_object: int = 50
    gripper_max_width: float = 0.08      # meters
    quality_threshold: float = 0.002
    torque_scale: float | None = None    # None: max centroid-to-vertex distance
    robustness_trials: int = 20
    position_noise: float = 0.002        # meters, contact perturbation
    friction_noise: float = 0.05
    torsion_arm: float = 0.005           # meters, soft-finger patch radius
    attempt_batch: int = 256
    max_attempt_batches: int = 40

    def __post_init__(self):
        if self.friction < 0.0:
            raise ValueError("friction coefficient must be non-negative")
        if self.cone_edges < 3:
            raise ValueError("friction cone needs at least 3 edges")
        if self.samples_per_object < 1:
            raise ValueError("samples_per_object must be positive")
        if self.gripper_max_width <= 0.0:
            raise ValueError("gripper width must be positive")
        if self.quality_threshold <= 0.0:
            raise ValueError("quality threshold must be positive")
        if self.robustness_trials < 1:
            raise ValueError("robustness trials must be positive")


@dataclass
class GraspCandidate:
    contact_a: np.ndarray
    contact_b: np.ndarray
    normal_a: np.ndarray   # outward unit surface normals
    normal_b: np.ndarray
    axis: np.ndarray       # unit vector from contact_a to contact_b
    width: float
    quality: float | None = None
    robust_quality: float | None = None


def _tangent_frame(n):
    a = np.array([1.0, 0.0, 0.0])
    if abs(n @ a) > 0.9:
        a = np.array([0.0, 1.0, 0.0])
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def _sample_surface_points(mesh, count, rng):
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0.0:
        raise DataError("mesh has zero surface area")
    faces = rng.choice(len(areas), size=count, p=areas / total)
    tri = mesh.vertices[mesh.faces[faces]]
    r1 = np.sqrt(rng.random(count))[:, None]
    r2 = rng.random(count)[:, None]
    points = (1.0 - r1) * tri[:, 0] + r1 * (1.0 - r2) * tri[:, 1] + r1 * r2 * tri[:, 2]
    normals = mesh.face_normals()[faces]
    return points, normals


def sample_antipodal_grasps(mesh: TriangleMesh, config: GraspConfig, seed) -> list:
    """Seeded rejection sampling of antipodal contact pairs.

    Returns up to ``samples_per_object`` accepted candidates; an empty list
    (not an error) when the attempt budget runs out first.
    """
    if not mesh.is_watertight():
        raise DataError("antipodal sampling requires a watertight mesh")
    rng = np.random.default_rng(seed)
    cos_limit = 1.0 / np.sqrt(1.0 + config.friction ** 2)  # cos(atan(mu))
    eps = 1e-9
    accepted = []
    face_normals = mesh.face_normals()
    for _ in range(config.max_attempt_batches):
        if len(accepted) >= config.samples_per_object:
            break
        n_try = config.attempt_batch
        points, normals = _sample_surface_points(mesh, n_try, rng)
        # inward directions inside the friction cone around -normal
        phi = rng.random(n_try) * 2.0 * np.pi
        radial = config.friction * np.sqrt(rng.random(n_try))
        dirs = np.empty_like(points)
        for i in range(n_try):
            t1, t2 = _tangent_frame(normals[i])
            d = -normals[i] + radial[i] * (np.cos(phi[i]) * t1 + np.sin(phi[i]) * t2)
            dirs[i] = d / np.linalg.norm(d)
        t_hits = ray_mesh_hits(points + eps * dirs, dirs, mesh)
        for i in range(n_try):
            if len(accepted) >= config.samples_per_object:
                break
            row = t_hits[i]
            finite = np.isfinite(row) & (row > eps)
            if not finite.any():
                continue
            # farthest crossing = the opposing side of the solid
            fi = int(np.argmax(np.where(finite, row, -np.inf)))
            t = row[fi]
            width = float(t)
            if width > config.gripper_max_width or width < eps:
                continue
            p2 = points[i] + t * dirs[i]
            n2 = face_normals[fi]
            d = dirs[i]
            # friction-cone condition at both contacts
            if -(d @ normals[i]) < cos_limit - 1e-12:
                continue
            if (d @ n2) < cos_limit - 1e-12:
                continue
            accepted.append(
                GraspCandidate(
                    contact_a=points[i].copy(),
                    contact_b=p2,
                    normal_a=normals[i].copy(),
                    normal_b=n2.copy(),
                    axis=d.copy(),
                    width=width,
                )
            )
    return accepted


def _default_torque_scale(mesh):
    centroid = mesh.centroid()
    return float(np.linalg.norm(mesh.vertices - centroid, axis=1).max())


def _wrench_points(contacts, normals, centroid, mu, m, torque_scale, torsion_arm):
    points = []
    for p, n in zip(contacts, normals):
        n = n / np.linalg.norm(n)
        t1, t2 = _tangent_frame(n)
        lever = (p - centroid) / torque_scale
        for j in range(m):
            phi = 2.0 * np.pi * j / m
            edge = -n + mu * (np.cos(phi) * t1 + np.sin(phi) * t2)
            edge /= np.linalg.norm(edge)
            points.append(np.concatenate([edge, np.cross(lever, edge)]))
        torsion = mu * torsion_arm / torque_scale
        if torsion > 0.0:
            points.append(np.concatenate([np.zeros(3), torsion * n]))
            points.append(np.concatenate([np.zeros(3), -torsion * n]))
    return np.asarray(points)


def ferrari_canny(candidate: GraspCandidate, centroid, config: GraspConfig,
                  torque_scale=None, friction=None) -> float:
    """Distance from the wrench-space origin to the primitive-wrench hull.

    Returns 0 for degenerate hulls (rank below 6) and when the origin lies
    on or outside the hull.
    """
    mu = config.friction if friction is None else friction
    rho = torque_scale if torque_scale is not None else config.torque_scale
    if rho is None:
        raise ValueError("torque scale required (pass explicitly or set in config)")
    wrenches = _wrench_points(
        [candidate.contact_a, candidate.contact_b],
        [candidate.normal_a, candidate.normal_b],
        np.asarray(centroid, dtype=np.float64),
        mu,
        config.cone_edges,
        rho,
        config.torsion_arm,
    )
    return hull_distance(wrenches)


def hull_distance(wrenches) -> float:
    """Origin-to-boundary distance of the convex hull; 0 outside/degenerate."""
    if len(wrenches) < 7:
        return 0.0
    try:
        hull = ConvexHull(wrenches)
    except QhullError:
        return 0.0
    offsets = hull.equations[:, -1]
    if offsets.max() > -1e-12:
        return 0.0
    return float(np.min(-offsets))


def _closest_point_on_mesh(point, mesh):
    """Closest surface point and its face index (vectorized over faces)."""
    tri = mesh.vertices[mesh.faces]
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab = b - a
    ac = c - a
    ap = point - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = point - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = point - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    candidates = np.empty_like(tri)
    # vertex regions
    candidates[:] = a[:, None]
    use_b = (d3 >= 0) & (d4 <= d3)
    candidates[use_b, 0] = b[use_b]
    use_c = (d6 >= 0) & (d5 <= d6)
    candidates[use_c, 0] = c[use_c]
    best = candidates[:, 0]

    # edge AB
    vc = d1 * d4 - d3 * d2
    mask = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    denom = d1 - d3
    v = np.where(np.abs(denom) > 1e-30, d1 / np.where(denom == 0, 1, denom), 0.0)
    pt = a + v[:, None] * ab
    upd = mask & (
        np.einsum("ij,ij->i", point - pt, point - pt)
        < np.einsum("ij,ij->i", point - best, point - best)
    )
    best[upd] = pt[upd]

    # edge AC
    vb = d5 * d2 - d1 * d6
    mask = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    denom = d2 - d6
    w = np.where(np.abs(denom) > 1e-30, d2 / np.where(denom == 0, 1, denom), 0.0)
    pt = a + w[:, None] * ac
    upd = mask & (
        np.einsum("ij,ij->i", point - pt, point - pt)
        < np.einsum("ij,ij->i", point - best, point - best)
    )
    best[upd] = pt[upd]

    # edge BC
    va = d3 * d6 - d5 * d4
    mask = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    denom = (d4 - d3) + (d5 - d6)
    w = np.where(np.abs(denom) > 1e-30, (d4 - d3) / np.where(denom == 0, 1, denom), 0.0)
    pt = b + w[:, None] * (c - b)
    upd = mask & (
        np.einsum("ij,ij->i", point - pt, point - pt)
        < np.einsum("ij,ij->i", point - best, point - best)
    )
    best[upd] = pt[upd]

    # face interior
    denom = va + vb + vc
    inside = (va >= 0) & (vb >= 0) & (vc >= 0) & (np.abs(denom) > 1e-30)
    v = np.where(inside, vb / np.where(denom == 0, 1, denom), 0.0)
    w = np.where(inside, vc / np.where(denom == 0, 1, denom), 0.0)
    pt = a + v[:, None] * ab + w[:, None] * ac
    upd = inside & (
        np.einsum("ij,ij->i", point - pt, point - pt)
        < np.einsum("ij,ij->i", point - best, point - best)
    )
    best[upd] = pt[upd]

    dists = np.einsum("ij,ij->i", point - best, point - best)
    fi = int(np.argmin(dists))
    return best[fi], fi


def robust_quality(candidate: GraspCandidate, mesh: TriangleMesh,
                   config: GraspConfig, seed) -> float:
    """Mean quality over seeded trials with perturbed contacts and friction.

    Contacts get Gaussian position noise and are re-projected to the mesh
    surface (normals re-read from the nearest face); friction gets Gaussian
    noise floored at zero.  With both noise levels zero this equals
    ``ferrari_canny`` exactly.
    """
    rng = np.random.default_rng(seed)
    centroid = mesh.centroid()
    rho = config.torque_scale if config.torque_scale is not None else _default_torque_scale(mesh)
    face_normals = mesh.face_normals()
    total = 0.0
    for _ in range(config.robustness_trials):
        mu = max(0.0, config.friction + rng.normal(0.0, config.friction_noise))
        if config.position_noise > 0.0:
            pa = candidate.contact_a + rng.normal(0.0, config.position_noise, 3)
            pb = candidate.contact_b + rng.normal(0.0, config.position_noise, 3)
            pa, fa = _closest_point_on_mesh(pa, mesh)
            pb, fb = _closest_point_on_mesh(pb, mesh)
            na, nb = face_normals[fa], face_normals[fb]
        else:
            pa, pb = candidate.contact_a, candidate.contact_b
            na, nb = candidate.normal_a, candidate.normal_b
        trial = GraspCandidate(
            contact_a=pa, contact_b=pb, normal_a=na, normal_b=nb,
            axis=candidate.axis, width=candidate.width,
        )
        total += ferrari_canny(trial, centroid, config, torque_scale=rho, friction=mu)
    return total / config.robustness_trials


def score_grasps(mesh: TriangleMesh, config: GraspConfig, seed) -> list:
    """Sample candidates and fill in nominal and robust quality for each."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    sample_seed, trial_root = ss.spawn(2)
    candidates = sample_antipodal_grasps(mesh, config, sample_seed)
    if not candidates:
        return []
    centroid = mesh.centroid()
    rho = config.torque_scale if config.torque_scale is not None else _default_torque_scale(mesh)
    trial_seeds = trial_root.spawn(len(candidates))
    for cand, trial_seed in zip(candidates, trial_seeds):
        cand.quality = ferrari_canny(cand, centroid, config, torque_scale=rho)
        cand.robust_quality = robust_quality(cand, mesh, config, trial_seed)
    return candidates


def graspness(mesh: TriangleMesh, config: GraspConfig, seed) -> float:
    """Fraction of sampled grasps whose robust quality clears the threshold.

    Zero when no candidate was accepted within the attempt budget.
    """
    candidates = score_grasps(mesh, config, seed)
    if not candidates:
        return 0.0
    good = sum(1 for c in candidates if c.robust_quality >= config.quality_threshold)
    return good / len(candidates)
