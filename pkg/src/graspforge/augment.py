"""Selection, pairing, interpolation-based shape generation, and dataset assembly.

High-scoring shapes (strictly above the t-th percentile of each metric) are
paired with their N-th through (N+K)-th nearest latent neighbors inside the
selected set.  Each pair is interpolated at every requested weight, decoded,
meshed, smoothed and screened by the completeness metric; surviving shapes
are appended to the original manifest at the requested ratio.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .geometry import completeness, marching_cubes, save_mesh, smooth_mesh
from .model import decode_batch, encode_batch, interpolate

__all__ = [
    "AugmentConfig",
    "GenerationPair",
    "select_high_scoring",
    "form_generation_pairs",
    "generate_shapes",
    "augment_dataset",
    "GeneratedShape",
]

MANIFEST_SCHEMA = 1


@dataclass(frozen=True)
class AugmentConfig:
    percentile: float = 75.0        # select scores strictly above this percentile
    neighbor_start: int = 2         # N: first neighbor rank used for pairing
    neighbor_span: int = 3          # K: ranks N..N+K become pairs
    alphas: tuple = (0.25, 0.5)
    ratio: float = 1.0              # generated : original
    rejection_outlier_pct: float = 20.0
    select_high_rarity: bool = True     # direction of the selection rule
    select_high_graspness: bool = True
    generated_extent: float = 0.10      # meters, longest edge of generated meshes
    smoothing_iterations: int = 10
    iso_level: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.percentile < 100.0:
            raise ConfigError("percentile must lie strictly between 0 and 100")
        if self.neighbor_start < 1:
            raise ConfigError("neighbor rank N must be at least 1")
        if self.neighbor_span < 0:
            raise ConfigError("neighbor span K must be non-negative")
        if not self.alphas:
            raise ConfigError("at least one interpolation weight required")
        if any(not 0.0 < a < 1.0 for a in self.alphas):
            raise ConfigError("interpolation weights must lie strictly inside (0, 1)")
        if self.ratio < 0.0:
            raise ConfigError("augmentation ratio must be non-negative")


@dataclass(frozen=True)
class GenerationPair:
    shape_a: str
    shape_b: str
    source_metric: str
    neighbor_rank: int


@dataclass
class GeneratedShape:
    shape_id: str
    mesh: object
    pair: GenerationPair
    alpha: float
    outlier_percentage: float


def select_high_scoring(scores: dict, percentile: float, high=True) -> set:
    """Ids whose score strictly exceeds the percentile of all scores.

    With ``high=False`` the rule flips: ids strictly below the
    (100 - percentile)-th percentile.
    """
    if not scores:
        raise DataError("cannot select from an empty score map")
    if not 0.0 < percentile < 100.0:
        raise ConfigError("percentile must lie strictly between 0 and 100")
    values = np.array(list(scores.values()), dtype=np.float64)
    if high:
        threshold = np.percentile(values, percentile)
        return {sid for sid, v in scores.items() if v > threshold}
    threshold = np.percentile(values, 100.0 - percentile)
    return {sid for sid, v in scores.items() if v < threshold}


def form_generation_pairs(selected_ids, latents_by_id, neighbor_start: int,
                          neighbor_span: int, source_metric: str) -> list:
    """Pair each selected shape with its N-th..(N+K)-th nearest selected neighbor.

    Ranks count from 1, exclude the shape itself, and break distance ties
    toward the lexicographically smaller id.  Unordered duplicates are
    dropped (first occurrence wins, iterating ids in sorted order).
    """
    ids = sorted(selected_ids)
    needed = neighbor_start + neighbor_span
    if len(ids) <= needed:
        raise DataError(
            f"pairing needs more than N+K={needed} selected shapes, got {len(ids)}"
        )
    x = np.stack([np.asarray(latents_by_id[i], dtype=np.float64) for i in ids])
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    pairs = []
    seen = set()
    for i, sid in enumerate(ids):
        for rank in range(neighbor_start, neighbor_start + neighbor_span + 1):
            j = int(order[i, rank - 1])
            key = (min(sid, ids[j]), max(sid, ids[j]))
            if key in seen:
                continue
            seen.add(key)
            pairs.append(
                GenerationPair(
                    shape_a=sid,
                    shape_b=ids[j],
                    source_metric=source_metric,
                    neighbor_rank=rank,
                )
            )
    return pairs


def _generated_id(pair: GenerationPair, alpha: float, checkpoint_digest: str) -> str:
    raw = f"{pair.shape_a}|{pair.shape_b}|{alpha:.6f}|{checkpoint_digest}"
    return "gen-" + hashlib.sha256(raw.encode()).hexdigest()[:16]


def generate_shapes(pairs, alphas, params, model_config, grids_by_id,
                    augment_config: AugmentConfig, checkpoint_digest: str = "") -> tuple:
    """Decode latent interpolants for every pair x alpha into meshes.

    Returns ``(accepted GeneratedShape list, rejection log)``.  Shapes whose
    decoded occupancy is empty at the iso level, or whose completeness
    outlier percentage exceeds the rejection cutoff, are logged and dropped.
    Weights of 0 and 1 (plain parent reconstructions) are permitted here
    even though production configs restrict them to (0, 1).
    """
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise DataError("interpolation weights must lie in [0, 1]")
    needed_ids = sorted({p.shape_a for p in pairs} | {p.shape_b for p in pairs})
    missing = [i for i in needed_ids if i not in grids_by_id]
    if missing:
        raise DataError(f"missing voxel grids for pair parents: {missing[:5]}")
    latents = {}
    if needed_ids:
        zs = encode_batch(params, [grids_by_id[i] for i in needed_ids], model_config)
        latents = {i: zs[n] for n, i in enumerate(needed_ids)}

    accepted, rejections = [], []
    jobs = [(pair, alpha) for pair in pairs for alpha in alphas]
    for start in range(0, len(jobs), 16):
        chunk = jobs[start : start + 16]
        z_mix = np.stack(
            [interpolate(latents[p.shape_a], latents[p.shape_b], a) for p, a in chunk]
        )
        decoded = decode_batch(params, z_mix, model_config)
        for (pair, alpha), grid in zip(chunk, decoded):
            shape_id = _generated_id(pair, alpha, checkpoint_digest)
            binary = grid.thresholded(augment_config.iso_level)
            if binary.occupied_count() == 0:
                rejections.append(
                    {"id": shape_id, "pair": [pair.shape_a, pair.shape_b],
                     "alpha": alpha, "reason": "empty decode at iso level"}
                )
                continue
            report = completeness(binary)
            if report.outlier_percentage > augment_config.rejection_outlier_pct:
                rejections.append(
                    {"id": shape_id, "pair": [pair.shape_a, pair.shape_b],
                     "alpha": alpha,
                     "reason": f"outlier percentage {report.outlier_percentage:.2f}"}
                )
                continue
            mesh = marching_cubes(grid, augment_config.iso_level)
            if mesh.is_empty():
                rejections.append(
                    {"id": shape_id, "pair": [pair.shape_a, pair.shape_b],
                     "alpha": alpha, "reason": "empty iso surface"}
                )
                continue
            mesh = smooth_mesh(mesh, augment_config.smoothing_iterations)
            lo, hi = mesh.bounds()
            extent = float((hi - lo).max())
            if extent > 0:
                mesh = mesh.transformed(
                    scale=augment_config.generated_extent / extent,
                    translation=None,
                )
                lo, hi = mesh.bounds()
                mesh = mesh.transformed(translation=-(lo + hi) / 2.0)
            accepted.append(
                GeneratedShape(
                    shape_id=shape_id,
                    mesh=mesh,
                    pair=pair,
                    alpha=alpha,
                    outlier_percentage=report.outlier_percentage,
                )
            )
    return accepted, rejections


def augment_dataset(original_manifest: dict, generated, ratio: float, seed,
                    out_dir, config_snapshot=None, scores=None) -> dict:
    """Assemble the augmented manifest, sampling generated shapes by seed.

    Appends ``round(ratio * n_original)`` generated shapes drawn uniformly
    without replacement, writes their meshes under ``out_dir/gen``, and
    returns the manifest dict (also written to ``out_dir/manifest.json``).
    """
    originals = original_manifest["entries"]
    want = int(round(ratio * len(originals)))
    pool = sorted(generated, key=lambda g: g.shape_id)
    if want > len(pool):
        raise DataError(
            f"need {want} generated shapes for ratio {ratio} over {len(originals)} "
            f"originals, only {len(pool)} available (short by {want - len(pool)})"
        )
    rng = np.random.default_rng(seed)
    chosen_idx = sorted(rng.choice(len(pool), size=want, replace=False).tolist())
    chosen = [pool[i] for i in chosen_idx]

    out_dir = Path(out_dir)
    gen_dir = out_dir / "gen"
    if chosen:
        gen_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for entry in originals:
        e = dict(entry)
        if scores and e["id"] in scores:
            e["scores"] = scores[e["id"]]
        entries.append(e)
    for g in chosen:
        rel = f"gen/{g.shape_id}.obj"
        save_mesh(g.mesh, out_dir / rel)
        lo, hi = g.mesh.bounds()
        entries.append(
            {
                "id": g.shape_id,
                "path": rel,
                "provenance": "generated",
                "parents": [g.pair.shape_a, g.pair.shape_b],
                "alpha": g.alpha,
                "source_metric": g.pair.source_metric,
                "neighbor_rank": g.pair.neighbor_rank,
                "outlier_percentage": g.outlier_percentage,
                "physical_extent": float((hi - lo).max()),
                "scores": None,
            }
        )
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "kind": "augmented",
        "seed": seed if isinstance(seed, int) else None,
        "ratio": ratio,
        "n_original": len(originals),
        "n_generated": len(chosen),
        "config": config_snapshot,
        "entries": entries,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
