"""Per-shape score table: latent rarity plus grasp-based graspness.

Scores serialize as ``{shape_id: {"rarity": r, "graspness": g, "n_grasps": n}}``.
Per-shape work is seeded from the master seed and the shape id, so results
do not depend on evaluation order and can safely run in parallel.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import DataError
from .grasping import GraspConfig, score_grasps
from .rarity import RarityConfig, rarity_scores

__all__ = [
    "shape_seed",
    "grasp_scores_for_mesh",
    "build_score_table",
    "save_score_table",
    "load_score_table",
]


def shape_seed(master_seed: int, shape_id: str, purpose: str = "grasp") -> np.random.SeedSequence:
    """Stable per-shape seed derived from the master seed and the id."""
    digest = hashlib.sha256(f"{master_seed}:{purpose}:{shape_id}".encode()).digest()
    return np.random.SeedSequence(int.from_bytes(digest[:8], "little"))


def grasp_scores_for_mesh(args):
    """Worker: (shape_id, mesh, config, master_seed) -> (id, graspness, n_grasps)."""
    shape_id, mesh, config, master_seed = args
    candidates = score_grasps(mesh, config, shape_seed(master_seed, shape_id))
    if not candidates:
        return shape_id, 0.0, 0
    good = sum(1 for c in candidates if c.robust_quality >= config.quality_threshold)
    return shape_id, good / len(candidates), len(candidates)


def build_score_table(shape_ids, latents, meshes, rarity_config: RarityConfig,
                      grasp_config: GraspConfig, master_seed: int, jobs: int = 1):
    """Rarity and graspness for every shape; deterministic regardless of jobs."""
    if not (len(shape_ids) == len(latents) == len(meshes)):
        raise DataError("ids, latents and meshes must align")
    rarity = rarity_scores(np.asarray(latents), rarity_config)
    work = [
        (shape_ids[i], meshes[i], grasp_config, master_seed)
        for i in range(len(shape_ids))
    ]
    results = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for shape_id, score, n in pool.map(grasp_scores_for_mesh, work):
                results[shape_id] = (score, n)
    else:
        for item in work:
            shape_id, score, n = grasp_scores_for_mesh(item)
            results[shape_id] = (score, n)
    table = {}
    for i, shape_id in enumerate(shape_ids):
        g, n = results[shape_id]
        table[shape_id] = {
            "rarity": float(rarity[i]),
            "graspness": float(g),
            "n_grasps": int(n),
        }
    return table


def save_score_table(table, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_score_table(path):
    with open(path, "r", encoding="utf-8") as fh:
        table = json.load(fh)
    for shape_id, entry in table.items():
        if "rarity" not in entry or "graspness" not in entry:
            raise DataError(f"score table entry {shape_id!r} missing required fields")
    return table
